//! Separable kernel series for the quadratic and cubic terms of the auxiliary expansion, the
//! integration-by-parts form of the quadratic term and the non-overlapping bound.
//!
//! Every kernel is a finite sum of products of exponentials, so nested integrals reduce to
//! running integrals on a grid fine enough for the fastest exponent.

use crate::error::{Error, Result};
use crate::sampled::SampledControl;
use crate::signals::ControlSignal;
use crate::simulate::{GalerkinOperator, OperatorKind};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Σ c e^{i(α t + β τ)}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Kernel2 {
    pub terms: Vec<(Complex64, f64, f64)>,
}

impl Kernel2 {
    /// `∂_1^a ∂_2^b K(t, τ)`.
    pub fn deriv(&self, t: f64, tau: f64, a: u32, b: u32) -> Complex64 {
        self.terms
            .iter()
            .map(|&(c, al, be)| c * (I * al).powu(a) * (I * be).powu(b) * Complex64::from_polar(1.0, al * t + be * tau))
            .sum()
    }

    pub fn eval(&self, t: f64, tau: f64) -> Complex64 {
        self.deriv(t, tau, 0, 0)
    }

    pub fn differentiated(&self, a: u32, b: u32) -> Kernel2 {
        Kernel2 {
            terms: self
                .terms
                .iter()
                .map(|&(c, al, be)| (c * (I * al).powu(a) * (I * be).powu(b), al, be))
                .collect(),
        }
    }

    fn max_frequency(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, &(_, a, b)| m.max(a.abs()).max(b.abs()))
    }

    /// `∫_0^T f(t) ∫_0^t g(τ) K(t, τ) dτ dt` with f, g tabulated at the grid nodes.
    pub fn double_integral(&self, sc: &SampledControl, f: &[f64], g: &[f64]) -> Complex64 {
        let nodes = sc.nodes();
        let mut total = ZERO;
        for &(c, al, be) in &self.terms {
            if c == ZERO {
                continue;
            }
            let inner: Vec<Complex64> = nodes.iter().zip(g).map(|(&t, &v)| v * Complex64::from_polar(1.0, be * t)).collect();
            let (run, _) = sc.grid.running_integral(&inner, ZERO);
            let outer: Vec<Complex64> = nodes
                .iter()
                .zip(f)
                .zip(&run)
                .map(|((&t, &v), r)| v * Complex64::from_polar(1.0, al * t) * r)
                .collect();
            total += c * sc.grid.integral(&outer);
        }
        total
    }
}

/// `Σ_{p,n} c_{pn} e^{i(α_p t + γ_{pn} τ + β_n s)}` with `γ_pn = λ_p − λ_n`, stored densely.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Kernel3 {
    pub coeffs: Vec<Vec<Complex64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Kernel3 {
    pub fn eval(&self, t: f64, tau: f64, s: f64) -> Complex64 {
        let mut acc = ZERO;
        for (p, row) in self.coeffs.iter().enumerate() {
            for (n, &c) in row.iter().enumerate() {
                let ph = self.alpha[p] * t + (self.lambda[p] - self.lambda[n]) * tau + self.beta[n] * s;
                acc += c * Complex64::from_polar(1.0, ph);
            }
        }
        acc
    }

    /// `∫_0^T u(t) ∫_0^t u(τ) ∫_0^τ u(s) K dt dτ ds` for one tabulated function u.
    pub fn triple_integral(&self, sc: &SampledControl, u: &[f64]) -> Complex64 {
        let nodes = sc.nodes();
        let n = self.beta.len();
        let inner: Vec<Vec<Complex64>> = (0..n)
            .map(|k| {
                let f: Vec<Complex64> = nodes
                    .iter()
                    .zip(u)
                    .map(|(&t, &v)| v * Complex64::from_polar(1.0, self.beta[k] * t))
                    .collect();
                sc.grid.running_integral(&f, ZERO).0
            })
            .collect();
        let mut total = ZERO;
        for (p, row) in self.coeffs.iter().enumerate() {
            if row.iter().all(|c| *c == ZERO) {
                continue;
            }
            let mid: Vec<Complex64> = nodes
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let mut acc = ZERO;
                    for (k, &c) in row.iter().enumerate() {
                        if c != ZERO {
                            acc += c * Complex64::from_polar(1.0, (self.lambda[p] - self.lambda[k]) * t) * inner[k][i];
                        }
                    }
                    acc * u[i]
                })
                .collect();
            let (run, _) = sc.grid.running_integral(&mid, ZERO);
            let outer: Vec<Complex64> = nodes
                .iter()
                .zip(u)
                .zip(&run)
                .map(|((&t, &v), r)| v * Complex64::from_polar(1.0, self.alpha[p] * t) * r)
                .collect();
            total += sc.grid.integral(&outer);
        }
        total
    }
}

/// Kernels along one mode `j` (1-based) for a given operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSet {
    pub j: usize,
    pub modes: usize,
    pub lambda: Vec<f64>,
    pub quad: Kernel2,
    pub cub1: Kernel2,
    pub cub2: Kernel2,
    pub cub3: Kernel3,
    /// Coefficient of `∫u_1² e^{iωt}` in the quadratic term (`⟨μ'²φ_1, φ_j⟩` on the Galerkin level).
    pub a1: f64,
    /// `(ad³)_{j1} / 6`, zero for the PDE.
    pub ad3: f64,
}

impl KernelSet {
    pub fn new(op: &GalerkinOperator, j: usize) -> Result<Self> {
        let n = op.modes();
        if j == 0 || j > n {
            return Err(Error::InvalidArgument(format!("mode {j} outside 1..={n}")));
        }
        let jj = j - 1;
        let l = &op.lambda;
        let (m, s) = (&op.m, &op.s);
        let mut quad = Vec::with_capacity(n);
        let mut cub1 = Vec::with_capacity(n);
        let mut cub2 = Vec::with_capacity(n);
        for k in 0..n {
            let al = l[jj] - l[k];
            let be = l[k] - l[0];
            quad.push((Complex64::new((l[0] - l[k]) * (l[k] - l[jj]) * m[(k, 0)] * m[(jj, k)], 0.0), al, be));
            cub1.push((Complex64::new((l[0] - l[k]) * m[(k, 0)] * s[(jj, k)], 0.0), al, be));
            cub2.push((Complex64::new((l[k] - l[jj]) * s[(k, 0)] * m[(jj, k)], 0.0), al, be));
        }
        let coeffs = (0..n)
            .map(|p| {
                (0..n)
                    .map(|k| {
                        Complex64::new(
                            (l[0] - l[k]) * (l[k] - l[p]) * (l[p] - l[jj]) * m[(k, 0)] * m[(p, k)] * m[(jj, p)],
                            0.0,
                        )
                    })
                    .collect()
            })
            .collect();
        let cub3 = Kernel3 {
            coeffs,
            alpha: (0..n).map(|p| l[jj] - l[p]).collect(),
            beta: (0..n).map(|k| l[k] - l[0]).collect(),
            lambda: l.clone(),
        };
        let ad3 = match op.kind {
            OperatorKind::Matrix => op.r[(jj, 0)] / 6.0,
            OperatorKind::Schrodinger => 0.0,
        };
        Ok(Self {
            j,
            modes: n,
            lambda: l.clone(),
            quad: Kernel2 { terms: quad },
            cub1: Kernel2 { terms: cub1 },
            cub2: Kernel2 { terms: cub2 },
            cub3,
            a1: s[(jj, 0)],
            ad3,
        })
    }

    pub fn omega(&self) -> f64 {
        self.lambda[self.j - 1] - self.lambda[0]
    }

    /// Drift coefficients in the integrated-by-parts form: `A^1` is the Galerkin `S_{j1}`,
    /// `A^2`, `A^3` follow from the quadratic kernel on the diagonal.
    pub fn drift(&self, p: u32) -> f64 {
        if p == 1 {
            return self.a1;
        }
        let w = self.omega();
        self.quad
            .terms
            .iter()
            .map(|&(c, al, be)| c.re * (-al * be).powi(p as i32 - 2) * (al - 0.5 * w))
            .sum()
    }

    /// Grid for integrals against these kernels.
    pub fn sample(&self, u: &ControlSignal) -> SampledControl {
        let w = self.quad.max_frequency().max(self.cub1.max_frequency()).max(self.omega().abs());
        let w = self.lambda.iter().fold(w, |m, &l| m.max((l - self.lambda[0]).abs()));
        let h = if w > 0.0 { std::f64::consts::PI / w } else { 1.0 };
        SampledControl::new(u, h, &[])
    }

    /// `∫_0^T f(t) e^{iωt} dt`.
    fn oscillatory(&self, sc: &SampledControl, f: impl Fn(usize) -> f64) -> Complex64 {
        let w = self.omega();
        let vals: Vec<Complex64> = sc
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &t)| f(i) * Complex64::from_polar(1.0, w * t))
            .collect();
        sc.grid.integral(&vals)
    }

    /// `−iA¹_j ∫u_1² e^{iωt} + ∬ u_1 u_1 k_quad`.
    pub fn quad_term_direct(&self, sc: &SampledControl) -> Complex64 {
        let u1 = &sc.prim[1];
        -I * self.a1 * self.oscillatory(sc, |i| u1[i] * u1[i]) + self.quad.double_integral(sc, u1, u1)
    }

    /// `−i Σ_p A^p_j ∫u_p² e^{iωt} + ∬ u_3 u_3 ∂_1²∂_2² k_quad`; needs `u_2(T) = u_3(T) = 0`.
    pub fn quad_term_ipp(&self, sc: &SampledControl) -> Result<Complex64> {
        let last = sc.grid.edges.len() - 1;
        let (u2t, u3t) = (sc.edge_prim[2][last], sc.edge_prim[3][last]);
        let scale = sc.prim[1].iter().fold(0.0f64, |m, v| m.max(v.abs())) * sc.horizon().max(1.0).powi(2);
        let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
        if u2t.abs() > tol || u3t.abs() > tol {
            return Err(Error::Contract(format!(
                "integration by parts needs u_2(T) = u_3(T) = 0, got {u2t:e}, {u3t:e}"
            )));
        }
        let mut acc = ZERO;
        for p in 1..=3u32 {
            let up = &sc.prim[p as usize];
            acc += -I * self.drift(p) * self.oscillatory(sc, |i| up[i] * up[i]);
        }
        let u3 = &sc.prim[3];
        Ok(acc + self.quad.differentiated(2, 2).double_integral(sc, u3, u3))
    }

    /// Third-order term along mode j at the horizon.
    pub fn cubic_term(&self, sc: &SampledControl) -> Complex64 {
        let u1 = &sc.prim[1];
        let sq: Vec<f64> = u1.iter().map(|v| v * v).collect();
        let mut total = I * self.cub1.double_integral(sc, &sq, u1) + I * self.cub2.double_integral(sc, u1, &sq)
            - self.cub3.triple_integral(sc, u1);
        if self.ad3 != 0.0 {
            total += self.ad3 * self.oscillatory(sc, |i| u1[i] * u1[i] * u1[i]);
        }
        total
    }
}

pub fn quad_term_direct(op: &GalerkinOperator, u: &ControlSignal, j: usize) -> Result<Complex64> {
    let ks = KernelSet::new(op, j)?;
    Ok(ks.quad_term_direct(&ks.sample(u)))
}

pub fn quad_term_ipp(op: &GalerkinOperator, u: &ControlSignal, j: usize) -> Result<Complex64> {
    let ks = KernelSet::new(op, j)?;
    ks.quad_term_ipp(&ks.sample(u))
}

pub fn cubic_term_kernels(op: &GalerkinOperator, u: &ControlSignal, j: usize) -> Result<Complex64> {
    let ks = KernelSet::new(op, j)?;
    Ok(ks.cubic_term(&ks.sample(u)))
}

/// Quadratic and cubic parts of `−iA³∫u_3² + iC∫u_1²u_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heuristic {
    pub quadratic: Complex64,
    pub cubic: Complex64,
}

impl Heuristic {
    pub fn total(&self) -> Complex64 {
        self.quadratic + self.cubic
    }
}

pub fn heuristic_leading(u: &ControlSignal, a3k: f64, c_k: f64) -> Heuristic {
    let q = u.integrate(|_, r| r[3] * r[3]);
    let c = u.integrate(|_, r| r[1] * r[1] * r[2]);
    Heuristic {
        quadratic: -I * a3k * q,
        cubic: I * c_k * c,
    }
}

/// Right-hand side of the non-overlapping estimate for a control on `[0, T_2]` split at `T_1`.
pub fn non_overlap_delta(u: &ControlSignal, t1: f64) -> Result<f64> {
    let t2 = u.horizon;
    if !(t1 > 0.0 && t1 < t2) {
        return Err(Error::InvalidArgument(format!("split {t1} outside (0, {t2})")));
    }
    let scale = u.integrate(|_, r| r[1].abs()).max(f64::MIN_POSITIVE) * t2.max(1.0).powi(3);
    let tol = 1e-9 * scale;
    let at = |n: usize, t: f64| u.primitive_at(n, t);
    for (n, t) in [(1, t1), (2, t1), (3, t1), (2, t2), (3, t2)] {
        let v = at(n, t);
        if v.abs() > tol {
            return Err(Error::Contract(format!("u_{n}({t}) = {v:e} must vanish")));
        }
    }
    let l2sq = |n: usize| u.integrate(|_, r| r[n] * r[n]);
    let l1 = |n: usize| u.integrate(|_, r| r[n].abs());
    let u1_late = u.integrate(|t, r| if t >= t1 { r[1] * r[1] } else { 0.0 });
    let grid = u.grid();
    let u2_late_sup = grid
        .nodes
        .iter()
        .zip(u.node_table())
        .filter(|(t, _)| **t >= t1)
        .fold(0.0f64, |m, (_, r)| m.max(r[2].abs()));
    let u1l1 = l1(1);
    Ok(l2sq(3) + l2sq(1) * l1(2) + u1l1.powi(3) + u1_late * u1l1 + u2_late_sup * l2sq(1))
}

#[cfg(test)]
mod tests;
