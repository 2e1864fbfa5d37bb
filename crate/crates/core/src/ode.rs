//! Thin wrapper around the DOP853 embedded Runge–Kutta pair for real and complex states.

use crate::error::{Error, Result};
use num_complex::Complex64;
use ode_solvers::{DVector, Dop853, OutputType, System};
use std::cell::RefCell;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: u32,
    /// Upper bound on the step; 0 means the interval length.
    pub h_max: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            max_steps: 2_000_000,
            h_max: 0.0,
        }
    }
}

struct RealSystem<F> {
    f: F,
}

// Time rides along as the last state component: the crate's DOP853 tableau has a wrong
// stage-time coefficient (c12 = 0), so the solver's own time argument is not trusted.
impl<F: Fn(f64, &[f64], &mut [f64])> System<f64, DVector<f64>> for RealSystem<F> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let n = y.len() - 1;
        (self.f)(y[n], &y.as_slice()[..n], &mut dy.as_mut_slice()[..n]);
        dy[n] = 1.0;
    }
}

/// Integrates `y' = f(t, y)` from t0 to t1 and returns y(t1).
pub fn integrate_real<F>(f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if t1 == t0 {
        return Ok(y0.to_vec());
    }
    let span = t1 - t0;
    let h_max = if opts.h_max > 0.0 { opts.h_max.min(span.abs()) } else { span.abs() };
    let mut solver = Dop853::from_param(
        RealSystem { f },
        t0,
        t1,
        span,
        DVector::from_iterator(y0.len() + 1, y0.iter().copied().chain([t0])),
        opts.rtol,
        opts.atol,
        0.9,
        0.0,
        0.333,
        6.0,
        h_max,
        0.0,
        opts.max_steps,
        // the built-in stiffness heuristic misfires on oscillatory linear systems
        u32::MAX,
        OutputType::Sparse,
    );
    solver
        .integrate()
        .map_err(|e| Error::Integration(format!("{e} on [{t0}, {t1}]")))?;
    let (ts, ys) = (solver.x_out(), solver.y_out());
    match (ts.last(), ys.last()) {
        (Some(&t), Some(y)) if (t - t1).abs() <= 1e-12 * (1.0 + t1.abs()) => Ok(y.as_slice()[..y0.len()].to_vec()),
        _ => Err(Error::Integration(format!("no output at t = {t1}"))),
    }
}

/// Integrates over consecutive intervals `[breaks[i], breaks[i+1]]`, restarting at each break.
pub fn integrate_real_piecewise<F>(f: F, breaks: &[f64], y0: &[f64], opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut y = y0.to_vec();
    for w in breaks.windows(2) {
        y = integrate_real(&f, w[0], w[1], &y, opts)?;
    }
    Ok(y)
}

fn as_complex(v: &[f64]) -> &[Complex64] {
    assert!(v.len() % 2 == 0);
    // SAFETY: Complex64 is repr(C) { re: f64, im: f64 } with the alignment of f64.
    unsafe { std::slice::from_raw_parts(v.as_ptr() as *const Complex64, v.len() / 2) }
}

fn as_complex_mut(v: &mut [f64]) -> &mut [Complex64] {
    assert!(v.len() % 2 == 0);
    // SAFETY: as above; the exclusive borrow is carried over.
    unsafe { std::slice::from_raw_parts_mut(v.as_mut_ptr() as *mut Complex64, v.len() / 2) }
}

pub fn complex_to_real(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn real_to_complex(v: &[f64]) -> Vec<Complex64> {
    as_complex(v).to_vec()
}

/// Complex version of [`integrate_real_piecewise`].
pub fn integrate_complex<F>(f: F, breaks: &[f64], y0: &[Complex64], opts: &OdeOptions) -> Result<Vec<Complex64>>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    let g = |t: f64, y: &[f64], dy: &mut [f64]| f(t, as_complex(y), as_complex_mut(dy));
    let y = integrate_real_piecewise(g, breaks, &complex_to_real(y0), opts)?;
    Ok(real_to_complex(&y))
}

/// Records the state at each requested time (which must be sorted and include the breaks).
pub fn integrate_complex_trajectory<F>(
    f: F,
    times: &[f64],
    y0: &[Complex64],
    opts: &OdeOptions,
) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    let out = RefCell::new(vec![y0.to_vec()]);
    let mut y = y0.to_vec();
    for w in times.windows(2) {
        y = integrate_complex(&f, w, &y, opts)?;
        out.borrow_mut().push(y.clone());
    }
    Ok(out.into_inner())
}
