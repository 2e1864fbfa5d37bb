//! Fixed-point targeting of a point near the ground trajectory through the two-pulse
//! construction. The complex amplitude z of the K-coefficient is updated by
//! `z ← z − P[F(v_z)] + P[x_f]`, where P reads the measured K-coefficient at the final time.

use super::{
    default_tv2_window, effective_cubic, fitted_support, ground_state, interaction, pulse_amplitudes, two_pulse_control,
    PulseShape,
};
use crate::correction::CorrectionConfig;
use crate::error::{Error, Result};
use crate::signals::ControlSignal;
use crate::simulate::{simulate_final, GalerkinOperator};
use crate::spectral::SpectralState;
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrouwerConfig {
    pub k: usize,
    /// Window T of each of the three segments; `None` uses the TV2 default.
    pub window: Option<f64>,
    pub pulse_fraction: f64,
    /// `None` fits pulses of size `radius` into the oscillating window.
    pub support: Option<f64>,
    pub max_iterations: usize,
    /// ρ′: the iterates z must stay in this ball.
    pub radius: f64,
    /// Required L² distance of the endpoint to the target.
    pub tolerance: f64,
    pub correction: CorrectionConfig,
}

impl BrouwerConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            window: None,
            pulse_fraction: 0.5,
            support: None,
            max_iterations: 50,
            radius: 1e-2,
            tolerance: 1e-6,
            correction: CorrectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BrouwerIteration {
    pub z: [f64; 2],
    pub alpha: f64,
    pub beta: f64,
    /// `‖ψ(3T) − x_f‖`.
    pub error: f64,
    /// Measured K-coefficient minus the target's.
    pub k_gap: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrouwerStatus {
    Converged,
    /// An iterate left the ball of radius ρ′.
    Diverged,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrouwerOutcome {
    pub status: BrouwerStatus,
    pub horizon: f64,
    pub target_k: [f64; 2],
    pub trace: Vec<BrouwerIteration>,
    pub final_error: f64,
    /// Control of the last iterate.
    pub control: Option<ControlSignal>,
}

impl BrouwerOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,re_z,im_z,alpha,beta,error,re_gap,im_gap\n");
        for (i, it) in self.trace.iter().enumerate() {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                i + 1,
                it.z[0],
                it.z[1],
                it.alpha,
                it.beta,
                it.error,
                it.k_gap[0],
                it.k_gap[1]
            ));
        }
        out
    }
}

/// Normalized `ψ_1(t) + ε ψ_K(t)` for complex ε.
pub fn perturbed_target(op: &GalerkinOperator, k: usize, eps: C, t: f64) -> SpectralState {
    let mut c = ground_state(op, t).coefficients;
    c[k - 1] += eps * C::from_polar(1.0, -op.lambda[k - 1] * t);
    let n = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    SpectralState::new(c.into_iter().map(|z| z / n).collect(), t)
}

fn distance(a: &SpectralState, b: &SpectralState) -> f64 {
    a.coefficients
        .iter()
        .zip(&b.coefficients)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Steers the ground state to `x_f` at time `3T`. The horizon is fixed by the configuration;
/// `x_f.time` must match it.
pub fn brouwer_targeting(op: &GalerkinOperator, x_f: &SpectralState, cfg: &BrouwerConfig) -> Result<BrouwerOutcome> {
    let k = cfg.k;
    if k < 2 || k > op.modes() {
        return Err(Error::Config(format!("lost mode {k} outside 2..={}", op.modes())));
    }
    if x_f.coefficients.len() != op.modes() {
        return Err(Error::InvalidArgument("target dimension does not match the operator".into()));
    }
    if !(cfg.radius > 0.0 && cfg.tolerance > 0.0 && cfg.max_iterations > 0) {
        return Err(Error::Config("radius, tolerance and max iterations must be positive".into()));
    }
    let omega = op.lambda[k - 1] - op.lambda[0];
    let window = cfg.window.unwrap_or_else(|| default_tv2_window(op, k));
    let limit = std::f64::consts::PI / (2.0 * omega);
    if !(window > 0.0 && window < limit) {
        return Err(Error::Config(format!("window {window} outside (0, {limit})")));
    }
    let horizon = 3.0 * window;
    if (x_f.time - horizon).abs() > 1e-12 * horizon {
        return Err(Error::Config(format!("target time {} differs from 3T = {horizon}", x_f.time)));
    }
    let t1 = cfg.pulse_fraction * window;
    // the largest admissible z maps to pulses of at most this size
    let th = 2.0 * omega * window;
    let largest = cfg.radius * (1.0 + (1.0 + th.cos().abs()) / th.sin().abs());
    let shape = PulseShape {
        length: window,
        t1,
        support: cfg.support.unwrap_or_else(|| fitted_support(t1, largest)),
    };
    shape.validate()?;
    let c_eff = effective_cubic(op, k)?;
    let want = interaction(op, x_f)[k - 1];
    let mut z = want;
    let mut trace = Vec::new();
    let mut control = None;
    let mut final_error = f64::INFINITY;
    let mut status = BrouwerStatus::MaxIterations;
    for _ in 0..cfg.max_iterations {
        if z.norm() > cfg.radius {
            status = BrouwerStatus::Diverged;
            break;
        }
        let (alpha, beta) = pulse_amplitudes(z, omega, window)?;
        let (u, _) = two_pulse_control(op, k, c_eff, alpha, beta, shape, x_f, &cfg.correction)?;
        let end = simulate_final(op, &u, &ground_state(op, 0.0), &cfg.correction.ode)?;
        let got = interaction(op, &end)[k - 1];
        let error = distance(&end, x_f);
        let gap = got - want;
        trace.push(BrouwerIteration {
            z: [z.re, z.im],
            alpha,
            beta,
            error,
            k_gap: [gap.re, gap.im],
        });
        control = Some(u);
        final_error = error;
        if error < cfg.tolerance {
            status = BrouwerStatus::Converged;
            break;
        }
        z -= gap;
    }
    Ok(BrouwerOutcome {
        status,
        horizon,
        target_k: [want.re, want.im],
        trace,
        final_error,
        control,
    })
}
