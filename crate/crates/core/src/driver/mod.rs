//! End-to-end motions along the lost direction: the `iφ_K` variation (oscillating control then
//! linear correction), the `φ_K` variation assembled from two of them, fixed-point targeting and
//! the toy-model experiments.

mod brouwer;
mod toys;

pub use brouwer::{
    brouwer_targeting, perturbed_target, BrouwerConfig, BrouwerIteration, BrouwerOutcome, BrouwerStatus,
};
pub use toys::{
    bilinear_experiments, bilinear_toy_system, bilinear_tv1_config, tm3_assembly, toy_experiments, BilinearToy, BilinearToyReport, SussmannReport, RunOutcome, Tm1Report,
    Tm3Report, ToyConfig, ToyReport,
};

use crate::correction::{correct_linear_components, projected_error, CorrectionConfig, NormEntry};
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::ode::OdeOptions;
use crate::signals::{loglog_fit, oscillating_control_pde, ControlSignal, SlopeFit};
use crate::simulate::{simulate_final, GalerkinOperator};
use crate::spectral::SpectralState;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const I: C = C::new(0.0, 1.0);

/// Exponent of the control size along the family.
pub const SIZE_EXPONENT: f64 = 1.0 / 41.0;
/// Exponent of the residual along the family.
pub const RESIDUAL_EXPONENT: f64 = 1.0 + 1.0 / 82.0;

/// `φ_j e^{−iλ_j t}` in the operator's eigenbasis (1-based j).
pub fn mode_state(op: &GalerkinOperator, j: usize, t: f64) -> SpectralState {
    let mut c = vec![C::new(0.0, 0.0); op.modes()];
    c[j - 1] = C::from_polar(1.0, -op.lambda[j - 1] * t);
    SpectralState::new(c, t)
}

pub fn ground_state(op: &GalerkinOperator, t: f64) -> SpectralState {
    mode_state(op, 1, t)
}

/// Cubic constant the truncated dynamics sees along mode `k`: the two first cubic kernels at
/// the origin, `k¹(0,0) − k²(0,0)`. For the PDE this is the truncated series `C_K`.
pub fn effective_cubic(op: &GalerkinOperator, k: usize) -> Result<f64> {
    let ks = KernelSet::new(op, k)?;
    let k1: f64 = ks.cub1.terms.iter().map(|t| t.0.re).sum();
    let k2: f64 = ks.cub2.terms.iter().map(|t| t.0.re).sum();
    Ok(k1 - k2)
}

/// Interaction coordinates `a_j = ⟨ψ(t), φ_j e^{−iλ_j t}⟩`.
pub fn interaction(op: &GalerkinOperator, psi: &SpectralState) -> Vec<C> {
    op.to_interaction(psi.time, &psi.coefficients)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `iφ_K`, variation `Ξ(T) = iψ_K(T)`.
    IPhiK,
    /// `φ_K`, variation `Ξ(T) = ψ_K(T)`.
    PhiK,
}

/// Oscillating pulse on `[0, t1]` followed by the correction on `[t1, length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub length: f64,
    pub t1: f64,
    /// Support constant ρ of the oscillating profile: `u_b` lives on `(0, ρ|b|^{4/41})`.
    pub support: f64,
}

impl PulseShape {
    fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1 < self.length && self.support > 0.0 && self.support <= 1.0) {
            return Err(Error::Config(format!(
                "pulse needs 0 < t1 < T and 0 < ρ ≤ 1, got t1 = {}, T = {}, ρ = {}",
                self.t1, self.length, self.support
            )));
        }
        Ok(())
    }
}

/// Controls and correction data of one assembled pulse.
#[derive(Debug, Clone)]
pub(crate) struct Pulse {
    /// Prefix, oscillating part and correction, on `[0, start + length]`.
    pub control: ControlSignal,
    pub oscillating: ControlSignal,
    pub passes: usize,
    pub condition: f64,
}

fn primitives_vanish(u: &ControlSignal, what: &str) -> Result<()> {
    let scale = u.integrate(|_, r| r[0].abs()).max(f64::MIN_POSITIVE) * u.horizon.max(1.0).powi(3);
    for n in 1..=3 {
        let v = u.primitive_end(n);
        if v.abs() > 1e-9 * scale {
            return Err(Error::Contract(format!("{what}: u_{n} at the end is {v:e}")));
        }
    }
    Ok(())
}

/// Appends `u_b` on `[0, t1]` and its linear correction on `[t1, length]` to `prefix`, steering
/// every mode but `k` to `target` at the end. Boundary conditions of the concatenation are
/// checked, not assumed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn corrected_pulse(
    op: &GalerkinOperator,
    k: usize,
    c_eff: f64,
    prefix: Option<&ControlSignal>,
    b: f64,
    shape: PulseShape,
    target: &SpectralState,
    cfg: &CorrectionConfig,
) -> Result<Pulse> {
    shape.validate()?;
    let osc = oscillating_control_pde(b, c_eff, shape.t1, shape.support)?;
    primitives_vanish(&osc, "oscillating control")?;
    let head = match prefix {
        Some(p) => p.concatenate(&osc),
        None => osc.clone(),
    };
    let psi = simulate_final(op, &head, &ground_state(op, 0.0), &cfg.ode)?;
    let t0 = head.horizon;
    let t_end = t0 + shape.length - shape.t1;
    let corr = correct_linear_components(op, &psi, target, t0, t_end, k, cfg)?;
    let [_, u2, u3] = corr.primitives_at_end;
    let scale = corr.control.integrate(|_, r| r[0].abs()).max(f64::MIN_POSITIVE);
    if u2.abs() > 1e-9 * scale || u3.abs() > 1e-9 * scale {
        return Err(Error::Contract(format!("correction leaves u_2 = {u2:e}, u_3 = {u3:e}")));
    }
    Ok(Pulse {
        control: head.concatenate(&corr.control),
        oscillating: osc,
        passes: corr.passes,
        condition: corr.condition,
    })
}

/// One point of a b-sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub b: f64,
    /// False when the point was dropped (see `flag`).
    pub valid: bool,
    pub flag: Option<String>,
    /// Measured coefficient along `ψ_K` at the final time.
    pub k_component: [f64; 2],
    /// Distance of the endpoint from `ψ_1 + bΞ` (K-component or full state, by direction).
    pub residual: f64,
    /// Endpoint error on the corrected components.
    pub projected_residual: f64,
    pub norms: Vec<NormEntry>,
    /// `‖u_b‖_{H²}` of the oscillating parts only.
    pub oscillating_h2: f64,
    pub correction_passes: usize,
    pub condition: f64,
    /// `|u_1(T)|` and `‖u_1‖²_{L²}` of the assembled control.
    pub u1_end: f64,
    pub u1_l2_squared: f64,
    /// Ground-mode phase defect `|arg(a_1)|` at the end.
    pub ground_phase: f64,
}

impl SweepPoint {
    fn dropped(b: f64, why: String) -> Self {
        Self {
            b,
            valid: false,
            flag: Some(why),
            k_component: [f64::NAN; 2],
            residual: f64::NAN,
            projected_residual: f64::NAN,
            norms: Vec::new(),
            oscillating_h2: f64::NAN,
            correction_passes: 0,
            condition: f64::NAN,
            u1_end: f64::NAN,
            u1_l2_squared: f64::NAN,
            ground_phase: f64::NAN,
        }
    }

    pub fn norm(&self, m: i32) -> Option<f64> {
        self.norms.iter().find(|e| e.m == m).map(|e| e.value)
    }
}

/// Report of a reachable-vector experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorVariation {
    pub direction: Direction,
    pub k: usize,
    pub modes: usize,
    /// Final time of the assembled control.
    pub horizon: f64,
    pub shape: PulseShape,
    pub c_eff: f64,
    pub size_exponent: f64,
    pub residual_exponent: f64,
    pub xi: String,
    pub points: Vec<SweepPoint>,
    /// Slope of the residual against |b| over the valid non-zero points.
    pub residual_fit: Option<SlopeFit>,
    /// Slope of `‖w_b‖_{H²}` against |b|.
    pub size_fit: Option<SlopeFit>,
    /// Largest projected residual over the valid points.
    pub projected_max: f64,
    /// `max |u_1(T)| / ‖u_1‖²` over the valid points, and the spread max/min of that ratio.
    pub motion_constant: f64,
    pub motion_spread: f64,
    /// TV2 only: gap between the shifted pulse's K-coefficient and `e^{2iωT}` times the
    /// unshifted one.
    pub phase_check: Option<f64>,
}

impl VectorVariation {
    pub fn valid_points(&self) -> usize {
        self.points.iter().filter(|p| p.valid && p.b != 0.0).count()
    }

    /// Comma-separated sweep table, one row per b.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "b,valid,re_k,im_k,residual,projected_residual,h2_norm,oscillating_h2,h_minus3,h_minus2,h_minus1,l2,h1,passes,condition,u1_end,u1_l2_squared,flag\n",
        );
        for p in &self.points {
            let n = |m| p.norm(m).unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e},{}\n",
                p.b,
                p.valid,
                p.k_component[0],
                p.k_component[1],
                p.residual,
                p.projected_residual,
                n(2),
                p.oscillating_h2,
                n(-3),
                n(-2),
                n(-1),
                n(0),
                n(1),
                p.correction_passes,
                p.condition,
                p.u1_end,
                p.u1_l2_squared,
                p.flag.as_deref().unwrap_or("").replace(',', ";"),
            ));
        }
        out
    }

    fn finish(mut self, min_points: usize) -> Result<Self> {
        let good: Vec<&SweepPoint> = self.points.iter().filter(|p| p.valid && p.b != 0.0).collect();
        self.projected_max = good.iter().map(|p| p.projected_residual).fold(0.0, f64::max);
        let bs: Vec<f64> = good.iter().map(|p| p.b.abs()).collect();
        let res: Vec<f64> = good.iter().map(|p| p.residual).collect();
        let h2: Vec<f64> = good.iter().map(|p| p.norm(2).unwrap_or(f64::NAN)).collect();
        let ratios: Vec<f64> = good
            .iter()
            .filter(|p| p.u1_l2_squared > 0.0)
            .map(|p| p.u1_end / p.u1_l2_squared)
            .collect();
        self.motion_constant = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        self.motion_spread = if lo > 0.0 && lo.is_finite() {
            self.motion_constant / lo
        } else {
            f64::NAN
        };
        if good.len() >= 2 {
            self.residual_fit = loglog_fit(&bs, &res).ok();
            self.size_fit = loglog_fit(&bs, &h2).ok();
        }
        if good.len() < min_points {
            return Err(Error::Experiment(format!(
                "only {} valid sweep points (need {min_points}): {}",
                good.len(),
                self.points
                    .iter()
                    .filter_map(|p| p.flag.as_ref().map(|f| format!("b = {:e}: {f}", p.b)))
                    .collect::<Vec<_>>()
                    .join("; ")
            )));
        }
        Ok(self)
    }
}

/// `n` log-spaced values from `hi` down to `lo`.
pub fn log_sweep(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tv1Config {
    pub k: usize,
    pub horizon: f64,
    pub t1: f64,
    pub support: f64,
    pub bs: Vec<f64>,
    pub correction: CorrectionConfig,
    pub min_points: usize,
}

impl Tv1Config {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            horizon: 0.5,
            t1: 0.25,
            support: 0.25,
            bs: log_sweep(1e-2, 1e-5, 8),
            correction: CorrectionConfig::default(),
            min_points: 5,
        }
    }

    fn shape(&self) -> PulseShape {
        PulseShape {
            length: self.horizon,
            t1: self.t1,
            support: self.support,
        }
    }
}

fn sweep_point(
    op: &GalerkinOperator,
    k: usize,
    b: f64,
    control: &ControlSignal,
    oscillating_h2: f64,
    passes: usize,
    condition: f64,
    target: &SpectralState,
    residual: impl Fn(&[C]) -> f64,
    ode: &OdeOptions,
) -> Result<SweepPoint> {
    let end = simulate_final(op, control, &ground_state(op, 0.0), ode)?;
    let a = interaction(op, &end);
    let t = control.horizon;
    Ok(SweepPoint {
        b,
        valid: true,
        flag: None,
        k_component: [a[k - 1].re, a[k - 1].im],
        residual: residual(&a),
        projected_residual: projected_error(op, &end, target, t, k),
        norms: (-3..=2)
            .map(|m| NormEntry {
                m,
                value: control.sobolev_norm(m),
            })
            .collect(),
        oscillating_h2,
        correction_passes: passes,
        condition,
        u1_end: control.primitive_end(1).abs(),
        u1_l2_squared: control.integrate(|_, r| r[1] * r[1]),
        ground_phase: a[0].arg().abs(),
    })
}

/// `iφ_K`: oscillating control on `[0, T₁]`, correction on `[T₁, T]`, K-residual
/// `|⟨ψ(T), ψ_K(T)⟩ − ib|` and the projected residual for each b.
pub fn reachable_vector_i_phik(op: &GalerkinOperator, cfg: &Tv1Config) -> Result<VectorVariation> {
    let k = cfg.k;
    if k < 2 || k > op.modes() {
        return Err(Error::Config(format!("lost mode {k} outside 2..={}", op.modes())));
    }
    let shape = cfg.shape();
    shape.validate()?;
    let c_eff = effective_cubic(op, k)?;
    let target = ground_state(op, cfg.horizon);
    let points: Vec<SweepPoint> = cfg
        .bs
        .par_iter()
        .map(|&b| {
            let run = || -> Result<SweepPoint> {
                let p = corrected_pulse(op, k, c_eff, None, b, shape, &target, &cfg.correction)?;
                sweep_point(
                    op,
                    k,
                    b,
                    &p.control,
                    p.oscillating.sobolev_norm(2),
                    p.passes,
                    p.condition,
                    &target,
                    |a| (a[k - 1] - I * b).norm(),
                    &cfg.correction.ode,
                )
            };
            run().unwrap_or_else(|e| SweepPoint::dropped(b, e.to_string()))
        })
        .collect();
    VectorVariation {
        direction: Direction::IPhiK,
        k,
        modes: op.modes(),
        horizon: cfg.horizon,
        shape,
        c_eff,
        size_exponent: SIZE_EXPONENT,
        residual_exponent: RESIDUAL_EXPONENT,
        xi: "i psi_K(T)".into(),
        points,
        residual_fit: None,
        size_fit: None,
        projected_max: 0.0,
        motion_constant: 0.0,
        motion_spread: f64::NAN,
        phase_check: None,
    }
    .finish(cfg.min_points)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tv2Config {
    pub k: usize,
    /// Length T of each of the three windows; `None` uses `min(0.3, 0.9π/(2(λ_K − λ_1)))`.
    pub window: Option<f64>,
    /// Oscillating part as a fraction of each pulse window.
    pub pulse_fraction: f64,
    /// Support constant of the pulses; `None` fits the largest pulse of the sweep into 90% of
    /// the oscillating window, capped at 0.25.
    pub support: Option<f64>,
    pub bs: Vec<f64>,
    pub correction: CorrectionConfig,
    pub min_points: usize,
}

impl Tv2Config {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            window: None,
            pulse_fraction: 0.5,
            support: None,
            bs: log_sweep(1e-2, 1e-5, 8),
            correction: CorrectionConfig::default(),
            min_points: 5,
        }
    }
}

pub fn default_tv2_window(op: &GalerkinOperator, k: usize) -> f64 {
    let w = op.lambda[k - 1] - op.lambda[0];
    0.3f64.min(0.9 * std::f64::consts::PI / (2.0 * w))
}

/// Largest support constant (at most 0.25) for which a pulse of amplitude `largest` fills at most
/// 90% of a window of length `t1`.
pub fn fitted_support(t1: f64, largest: f64) -> f64 {
    if largest == 0.0 {
        return 0.25;
    }
    0.25f64.min(0.9 * t1 / largest.powf(4.0 / 41.0))
}

/// `(α, β)` with `iα + iβe^{2iωT} = z`: the two pulse amplitudes realizing the complex
/// K-coefficient z after `u_α # 0_{[0,T]} # u_β`.
pub fn pulse_amplitudes(z: C, omega: f64, window: f64) -> Result<(f64, f64)> {
    let th = 2.0 * omega * window;
    let s = th.sin();
    if s.abs() < 1e-12 {
        return Err(Error::Config(format!("sin(2ωT) = {s:e}: the two pulses are aligned")));
    }
    let beta = -z.re / s;
    let alpha = z.im - beta * th.cos();
    Ok((alpha, beta))
}

/// `u_α # 0_{[0,T]} # u_β` on `[0, 3T]`; the last correction steers to `target`.
pub(crate) fn two_pulse_control(
    op: &GalerkinOperator,
    k: usize,
    c_eff: f64,
    alpha: f64,
    beta: f64,
    shape: PulseShape,
    target: &SpectralState,
    cfg: &CorrectionConfig,
) -> Result<(ControlSignal, [Pulse; 2])> {
    let first = corrected_pulse(op, k, c_eff, None, alpha, shape, &ground_state(op, shape.length), cfg)?;
    let idle = first.control.concatenate(&ControlSignal::zero(shape.length));
    let second = corrected_pulse(op, k, c_eff, Some(&idle), beta, shape, target, cfg)?;
    Ok((second.control.clone(), [first, second]))
}

/// K-coefficient of `u` started at time `shift` from the ground state, against the same pulse
/// at time 0: the ratio must be exactly `e^{iω·shift}` (interaction coordinates).
pub fn shifted_phase_gap(op: &GalerkinOperator, k: usize, u: &ControlSignal, shift: f64, ode: &OdeOptions) -> Result<f64> {
    let direct = simulate_final(op, u, &ground_state(op, 0.0), ode)?;
    let shifted = simulate_final(op, &ControlSignal::zero(shift).concatenate(u), &ground_state(op, 0.0), ode)?;
    let (a, s) = (interaction(op, &direct), interaction(op, &shifted));
    let w = op.lambda[k - 1] - op.lambda[0];
    // normalize by the ground coefficient to remove the global phase
    let want = a[k - 1] / a[0] * C::from_polar(1.0, w * shift);
    let got = s[k - 1] / s[0];
    Ok((got - want).norm())
}

/// `φ_K`: `u_α # 0_{[0,T]} # u_β` with `β = −b/sin(2ωT)`, `α = −β cos(2ωT)`; residual
/// `‖ψ(3T) − ψ_1(3T) − bψ_K(3T)‖`.
pub fn reachable_vector_phik(op: &GalerkinOperator, cfg: &Tv2Config) -> Result<VectorVariation> {
    let k = cfg.k;
    if k < 2 || k > op.modes() {
        return Err(Error::Config(format!("lost mode {k} outside 2..={}", op.modes())));
    }
    let omega = op.lambda[k - 1] - op.lambda[0];
    let window = cfg.window.unwrap_or_else(|| default_tv2_window(op, k));
    let limit = std::f64::consts::PI / (2.0 * omega);
    if !(window > 0.0 && window < limit) {
        return Err(Error::Config(format!("window {window} outside (0, π/(2(λ_K − λ_1))) = (0, {limit})")));
    }
    if !(cfg.pulse_fraction > 0.0 && cfg.pulse_fraction < 1.0) {
        return Err(Error::Config(format!("pulse fraction {} outside (0, 1)", cfg.pulse_fraction)));
    }
    let t1 = cfg.pulse_fraction * window;
    let largest = cfg
        .bs
        .iter()
        .filter_map(|&b| pulse_amplitudes(C::new(b, 0.0), omega, window).ok())
        .fold(0.0f64, |m, (a, b)| m.max(a.abs()).max(b.abs()));
    let shape = PulseShape {
        length: window,
        t1,
        support: cfg.support.unwrap_or_else(|| fitted_support(t1, largest)),
    };
    shape.validate()?;
    let c_eff = effective_cubic(op, k)?;
    let horizon = 3.0 * window;
    let target = ground_state(op, horizon);
    let points: Vec<SweepPoint> = cfg
        .bs
        .par_iter()
        .map(|&b| {
            let run = || -> Result<SweepPoint> {
                let (alpha, beta) = pulse_amplitudes(C::new(b, 0.0), omega, window)?;
                let (u, pulses) = two_pulse_control(op, k, c_eff, alpha, beta, shape, &target, &cfg.correction)?;
                let osc_h2 = pulses[0].oscillating.sobolev_norm(2) + pulses[1].oscillating.sobolev_norm(2);
                sweep_point(
                    op,
                    k,
                    b,
                    &u,
                    osc_h2,
                    pulses[0].passes + pulses[1].passes,
                    pulses[0].condition.max(pulses[1].condition),
                    &target,
                    |a| {
                        a.iter()
                            .enumerate()
                            .map(|(j, z)| {
                                let want = if j == 0 {
                                    C::new(1.0, 0.0)
                                } else if j == k - 1 {
                                    C::new(b, 0.0)
                                } else {
                                    C::new(0.0, 0.0)
                                };
                                (z - want).norm_sqr()
                            })
                            .sum::<f64>()
                            .sqrt()
                    },
                    &cfg.correction.ode,
                )
            };
            run().unwrap_or_else(|e| SweepPoint::dropped(b, e.to_string()))
        })
        .collect();
    // phase bookkeeping on the largest pulse of the sweep
    let phase_check = cfg
        .bs
        .iter()
        .copied()
        .filter(|b| *b != 0.0)
        .fold(None, |m: Option<f64>, b| Some(m.map_or(b, |x: f64| x.max(b.abs()))))
        .and_then(|b| {
            let (_, beta) = pulse_amplitudes(C::new(b, 0.0), omega, window).ok()?;
            let u = oscillating_control_pde(beta, c_eff, shape.t1, shape.support).ok()?;
            shifted_phase_gap(op, k, &u, 2.0 * window, &cfg.correction.ode).ok()
        });
    VectorVariation {
        direction: Direction::PhiK,
        k,
        modes: op.modes(),
        horizon,
        shape,
        c_eff,
        size_exponent: SIZE_EXPONENT,
        residual_exponent: RESIDUAL_EXPONENT,
        xi: "psi_K(3T)".into(),
        points,
        residual_fit: None,
        size_fit: None,
        projected_max: 0.0,
        motion_constant: 0.0,
        motion_spread: f64::NAN,
        phase_check,
    }
    .finish(cfg.min_points)
}

#[cfg(test)]
mod tests;
