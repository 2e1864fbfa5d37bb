//! Time integration of the truncated Schrödinger system, its auxiliary form, the expansion
//! cascades and the finite-dimensional toy models.

mod expansion;
mod operator;
mod toys;

pub use expansion::{expansion_terms, ExpansionBundle};
pub use operator::{GalerkinOperator, OperatorKind};
pub use toys::{simulate_toy, ToyModel, ToyOutcome};

use crate::error::{Error, Result};
use crate::ode::{integrate_complex, OdeOptions};
use crate::signals::ControlSignal;
use crate::spectral::SpectralState;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// States (Schrödinger-picture coefficients) at the requested output times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
    /// Largest deviation of the L² norm from its initial value.
    pub norm_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &SpectralState {
        self.states.last().expect("empty trajectory")
    }

    /// Columns `t, re_c1, im_c1, .., re_cN, im_cN`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for j in 1..=n {
            out.push_str(&format!(",re_c{j},im_c{j}"));
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:e}"));
            for c in &s.coefficients {
                out.push_str(&format!(",{:e},{:e}", c.re, c.im));
            }
            out.push('\n');
        }
        out
    }
}

/// What a run used, for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub operator_hash: String,
    pub modes: usize,
    pub rtol: f64,
    pub atol: f64,
    pub horizon: f64,
    pub grid_cells: usize,
    pub output_times: usize,
}

impl RunManifest {
    pub fn new(op: &GalerkinOperator, u: &ControlSignal, opts: &OdeOptions, outputs: usize) -> Self {
        Self {
            operator_hash: op.hash(),
            modes: op.modes(),
            rtol: opts.rtol,
            atol: opts.atol,
            horizon: u.horizon,
            grid_cells: u.grid().cells(),
            output_times: outputs,
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("no output times".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times[0] < 0.0 {
        return Err(Error::InvalidArgument("output times must be sorted and non-negative".into()));
    }
    Ok(())
}

/// Union of output times and control feature points, sorted.
pub(crate) fn knots(u: &ControlSignal, times: &[f64]) -> Vec<f64> {
    let mut k = vec![0.0];
    k.extend(u.feature_points());
    k.extend_from_slice(times);
    k.sort_by(f64::total_cmp);
    k.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let end = times.last().copied().unwrap_or(0.0);
    k.retain(|&t| t <= end);
    k
}

/// Integrates `a' = f(t, a)` through the knots and records `a` at each output time.
pub(crate) fn integrate_recording<F>(
    f: F,
    u: &ControlSignal,
    times: &[f64],
    a0: Vec<Complex64>,
    opts: &OdeOptions,
) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    check_times(times)?;
    let ks = knots(u, times);
    let mut out = Vec::with_capacity(times.len());
    let mut a = a0;
    let mut next = 0;
    let record = |t: f64, a: &Vec<Complex64>, next: &mut usize, out: &mut Vec<Vec<Complex64>>| {
        while *next < times.len() && (times[*next] - t).abs() < 1e-14 {
            out.push(a.clone());
            *next += 1;
        }
    };
    record(0.0, &a, &mut next, &mut out);
    for w in ks.windows(2) {
        a = integrate_complex(&f, w, &a, opts)?;
        record(w[1], &a, &mut next, &mut out);
    }
    if out.len() != times.len() {
        return Err(Error::Integration("output times were not all reached".into()));
    }
    Ok(out)
}

fn to_states(op: &GalerkinOperator, times: &[f64], amps: Vec<Vec<Complex64>>) -> Vec<SpectralState> {
    times
        .iter()
        .zip(amps)
        .map(|(&t, a)| SpectralState::new(op.from_interaction(t, &a), t))
        .collect()
}

fn norm_drift(states: &[SpectralState], reference: f64) -> f64 {
    states.iter().map(|s| (s.l2_norm() - reference).abs()).fold(0.0, f64::max)
}

/// Solves `i c' = Λc − u(t) M c` from `psi0` at t = 0 in the interaction picture.
pub fn simulate(
    op: &GalerkinOperator,
    u: &ControlSignal,
    psi0: &SpectralState,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    if psi0.len() != op.modes() {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} modes, operator has {}",
            psi0.len(),
            op.modes()
        )));
    }
    let n0 = psi0.l2_norm();
    if (n0 - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("initial state has norm {n0}")));
    }
    let rhs = |t: f64, a: &[Complex64], da: &mut [Complex64]| {
        da.fill(Complex64::new(0.0, 0.0));
        let ut = u.eval(t);
        if ut != 0.0 {
            op.apply_rotated(&op.m, t, a, I * ut, da);
        }
    };
    let amps = integrate_recording(rhs, u, times, psi0.coefficients.clone(), opts)?;
    let states = to_states(op, times, amps);
    Ok(Trajectory {
        norm_drift: norm_drift(&states, n0),
        times: times.to_vec(),
        states,
    })
}

/// `simulate` with a single output at the horizon.
pub fn simulate_final(op: &GalerkinOperator, u: &ControlSignal, psi0: &SpectralState, opts: &OdeOptions) -> Result<SpectralState> {
    Ok(simulate(op, u, psi0, &[u.horizon], opts)?.states.remove(0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxiliaryRun {
    pub trajectory: Trajectory,
    /// max over output times of ‖c̃(t) − exp(−i u_1(t) M) c(t)‖.
    pub gauge_mismatch: f64,
}

/// Integrates the auxiliary system `i c̃' = Λc̃ − i u_1 D c̃ + u_1² S c̃` (exact conjugation for
/// matrix operators) and compares it with the gauge transform of the direct solution.
pub fn simulate_auxiliary(
    op: &GalerkinOperator,
    u: &ControlSignal,
    psi0: &SpectralState,
    times: &[f64],
    opts: &OdeOptions,
    gauge_tol: f64,
) -> Result<AuxiliaryRun> {
    let direct = simulate(op, u, psi0, times, opts)?;
    let rhs = |t: f64, a: &[Complex64], da: &mut [Complex64]| {
        da.fill(Complex64::new(0.0, 0.0));
        let u1 = u.primitive_at(1, t);
        if u1 == 0.0 {
            return;
        }
        match op.kind {
            OperatorKind::Schrodinger => {
                op.apply_rotated(&op.d, t, a, Complex64::new(-u1, 0.0), da);
                op.apply_rotated(&op.s, t, a, -I * u1 * u1, da);
            }
            OperatorKind::Matrix => {
                let g = op.conjugated_drift(u1);
                op.apply_rotated_complex(&g, t, a, -I, da);
            }
        }
    };
    let amps = integrate_recording(rhs, u, times, psi0.coefficients.clone(), opts)?;
    let states = to_states(op, times, amps);
    let mut mismatch = 0.0f64;
    for (s, d) in states.iter().zip(&direct.states) {
        let u1 = u.primitive_at(1, s.time);
        let g = op.gauge(u1);
        let expected = &g * nalgebra::DVector::from_column_slice(&d.coefficients);
        let gap = s
            .coefficients
            .iter()
            .zip(expected.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        mismatch = mismatch.max(gap);
    }
    if mismatch > gauge_tol {
        return Err(Error::Inconsistency {
            what: "auxiliary system vs gauge transform".into(),
            discrepancy: mismatch,
            tolerance: gauge_tol,
        });
    }
    Ok(AuxiliaryRun {
        trajectory: Trajectory {
            norm_drift: norm_drift(&states, psi0.l2_norm()),
            times: times.to_vec(),
            states,
        },
        gauge_mismatch: mismatch,
    })
}

/// `i X' = H_0 X − u(t) H_1 X` for real symmetric `H_0`, `H_1`; states are in the original
/// coordinates.
pub fn simulate_bilinear_ode(
    h0: &DMatrix<f64>,
    h1: &DMatrix<f64>,
    u: &ControlSignal,
    x0: &[Complex64],
    times: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let op = GalerkinOperator::from_matrices(h0, h1)?;
    let c0 = op.to_eigen(x0);
    let psi0 = SpectralState::new(c0, 0.0);
    let norm = psi0.l2_norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("zero initial state".into()));
    }
    let unit = psi0.scale(Complex64::new(1.0 / norm, 0.0));
    let mut tr = simulate(&op, u, &unit, times, opts)?;
    for s in &mut tr.states {
        let x = op.from_eigen(&s.coefficients);
        s.coefficients = x.into_iter().map(|c| c * norm).collect();
    }
    tr.norm_drift *= norm;
    Ok(tr)
}

#[cfg(test)]
mod tests;
