use super::control::ControlSignal;
use crate::error::{Error, Result};

/// Least-squares line through (log x, log y).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
}

pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return Err(Error::Experiment(format!("slope fit needs 2 positive points, got {n}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = if n > 2 {
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        points: n,
    })
}

/// Norm selector: `k ≥ 0` is the seminorm `‖u^(k)‖_{L^p}`; `k < 0` is `|u_1(T)| + ‖u_{|k|}‖_{L^p}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormSpec {
    pub k: i32,
    /// `f64::INFINITY` for the sup norm.
    pub p: f64,
}

impl NormSpec {
    /// Exponent `(7 - 4k + 4/p)/41` of the oscillating PDE family.
    pub fn pde_exponent(&self) -> f64 {
        let inv_p = if self.p.is_infinite() { 0.0 } else { 1.0 / self.p };
        (7.0 - 4.0 * self.k as f64 + 4.0 * inv_p) / 41.0
    }
}

pub fn measure(u: &ControlSignal, spec: NormSpec) -> f64 {
    if spec.k >= 0 {
        u.derivative_lp_norm(spec.k as usize, spec.p)
    } else {
        u.primitive_end(1).abs() + u.primitive_lp_norm(spec.k.unsigned_abs() as usize, spec.p)
    }
}

/// Fitted slope of `log‖u_b‖` against `log|b|`.
pub fn scaling_law_fit<F>(family: F, spec: NormSpec, bs: &[f64]) -> Result<SlopeFit>
where
    F: Fn(f64) -> Result<ControlSignal>,
{
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &b in bs {
        let u = family(b)?;
        xs.push(b.abs());
        ys.push(measure(&u, spec));
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(0.0, f64::max);
    if bs.len() < 4 || hi / lo < 1e4 {
        return Err(Error::InvalidArgument(
            "scaling fit needs at least 4 values spanning 4 decades".into(),
        ));
    }
    loglog_fit(&xs, &ys)
}
