use super::DipoleMoment;
use crate::error::{Error, Result};
use crate::spectral::{eigenfunction_deriv, eigenfunction_value, eigenvalue};
use nalgebra::DMatrix;

/// Galerkin matrices of a dipole on the first `n` modes (0-based storage, index j-1):
/// `M_jn = ⟨μφ_n, φ_j⟩`, `S_jn = ⟨μ'²φ_n, φ_j⟩`, `D_jn = ⟨2μ'φ_n' + μ''φ_n, φ_j⟩`.
#[derive(Debug, Clone)]
pub struct CouplingMatrices {
    pub m: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl CouplingMatrices {
    pub fn new(mu: &DipoleMoment, n: usize) -> Self {
        let rule = mu.quadrature();
        let q = rule.len();
        let mut phi = DMatrix::zeros(n, q);
        let mut dphi = DMatrix::zeros(n, q);
        for (c, &x) in rule.nodes.iter().enumerate() {
            for j in 0..n {
                phi[(j, c)] = eigenfunction_value(j + 1, x);
                dphi[(j, c)] = eigenfunction_deriv(j + 1, x, 1);
            }
        }
        let mut wm = DMatrix::zeros(n, q);
        let mut ws = DMatrix::zeros(n, q);
        let mut wd1 = DMatrix::zeros(n, q);
        let mut wd0 = DMatrix::zeros(n, q);
        for (c, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let m0 = mu.deriv(x, 0);
            let m1 = mu.deriv(x, 1);
            let m2 = mu.deriv(x, 2);
            for j in 0..n {
                let p = phi[(j, c)] * w;
                wm[(j, c)] = p * m0;
                ws[(j, c)] = p * m1 * m1;
                wd1[(j, c)] = p * 2.0 * m1;
                wd0[(j, c)] = p * m2;
            }
        }
        let m = &wm * phi.transpose();
        let s = &ws * phi.transpose();
        let d = &wd1 * dphi.transpose() + &wd0 * phi.transpose();
        Self { m, s, d }
    }

    pub fn modes(&self) -> usize {
        self.m.nrows()
    }
}

/// Columns of M and S for modes 1 and K, which is all the series below need.
#[derive(Debug, Clone)]
pub struct ModeColumns {
    pub k: usize,
    pub m1: Vec<f64>,
    pub mk: Vec<f64>,
    pub s1: Vec<f64>,
    pub sk: Vec<f64>,
}

impl ModeColumns {
    pub fn new(mu: &DipoleMoment, k: usize, n: usize) -> Self {
        let rule = mu.quadrature();
        let mut m1 = vec![0.0; n];
        let mut mk = vec![0.0; n];
        let mut s1 = vec![0.0; n];
        let mut sk = vec![0.0; n];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let m0 = mu.deriv(x, 0);
            let d1 = mu.deriv(x, 1);
            let p1 = eigenfunction_value(1, x) * w;
            let pk = eigenfunction_value(k, x) * w;
            for j in 0..n {
                let pj = eigenfunction_value(j + 1, x);
                m1[j] += m0 * p1 * pj;
                mk[j] += m0 * pk * pj;
                s1[j] += d1 * d1 * p1 * pj;
                sk[j] += d1 * d1 * pk * pj;
            }
        }
        Self { k, m1, mk, s1, sk }
    }

    pub fn from_matrices(c: &CouplingMatrices, k: usize) -> Self {
        let n = c.modes();
        Self {
            k,
            m1: (0..n).map(|j| c.m[(j, 0)]).collect(),
            mk: (0..n).map(|j| c.m[(j, k - 1)]).collect(),
            s1: (0..n).map(|j| c.s[(j, 0)]).collect(),
            sk: (0..n).map(|j| c.s[(j, k - 1)]).collect(),
        }
    }

    pub fn drift(&self, p: u32) -> f64 {
        drift_series(&self.m1, &self.mk, self.k, p)
    }

    pub fn cubic(&self) -> f64 {
        cubic_series(&self.m1, &self.mk, &self.s1, &self.sk, self.k)
    }
}

/// Weight of `M_1j M_Kj` in A^p_K, sign included.
pub fn drift_weight(j: usize, k: usize, p: u32) -> f64 {
    let l1 = eigenvalue(1);
    let lk = eigenvalue(k);
    let lj = eigenvalue(j);
    let sign = if p % 2 == 1 { 1.0 } else { -1.0 };
    sign * (lj - 0.5 * (l1 + lk)) * ((lk - lj) * (lj - l1)).powi(p as i32 - 1)
}

/// `A^p_K = (-1)^{p-1} Σ_j (λ_j - (λ_1+λ_K)/2)(λ_K-λ_j)^{p-1}(λ_j-λ_1)^{p-1} M_1j M_Kj`.
pub fn drift_series(m1: &[f64], mk: &[f64], k: usize, p: u32) -> f64 {
    m1.iter()
        .zip(mk)
        .enumerate()
        .map(|(i, (a, b))| drift_weight(i + 1, k, p) * a * b)
        .sum()
}

/// `C_K = Σ_j (λ_1-λ_j) M_1j S_Kj - Σ_j (λ_j-λ_K) M_jK S_1j`.
pub fn cubic_series(m1: &[f64], mk: &[f64], s1: &[f64], sk: &[f64], k: usize) -> f64 {
    let l1 = eigenvalue(1);
    let lk = eigenvalue(k);
    (0..m1.len())
        .map(|i| {
            let lj = eigenvalue(i + 1);
            (l1 - lj) * m1[i] * sk[i] - (lj - lk) * mk[i] * s1[i]
        })
        .sum()
}

/// ⟨μφ_q, φ_j⟩.
pub fn mu_coefficient(mu: &DipoleMoment, q: usize, j: usize) -> f64 {
    mu.quadrature()
        .integrate(|x| mu.value(x) * eigenfunction_value(q, x) * eigenfunction_value(j, x))
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DriftValue {
    pub value: f64,
    /// |A(2N) - A(N)|.
    pub tail_estimate: f64,
}

pub fn drift_coefficient_series(
    mu: &DipoleMoment,
    k: usize,
    p: u32,
    n: usize,
) -> Result<DriftValue> {
    if !(1..=3).contains(&p) {
        return Err(Error::InvalidArgument(format!("drift order p = {p} not in 1..=3")));
    }
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("mode K = {k} outside 2..={n}")));
    }
    let wide = ModeColumns::new(mu, k, 2 * n);
    let full = wide.drift(p);
    let value = drift_series(&wide.m1[..n], &wide.mk[..n], k, p);
    Ok(DriftValue {
        value,
        tail_estimate: (full - value).abs(),
    })
}

/// ⟨μ'²φ_1, φ_K⟩.
pub fn drift_coefficient_bracket(mu: &DipoleMoment, k: usize) -> f64 {
    mu.quadrature().integrate(|x| {
        let d = mu.deriv(x, 1);
        d * d * eigenfunction_value(1, x) * eigenfunction_value(k, x)
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CubicCoefficient {
    pub series: f64,
    /// −4⟨μ'²μ''φ_1, φ_K⟩.
    pub bracket: f64,
    pub discrepancy: f64,
    pub tail_estimate: f64,
}

impl CubicCoefficient {
    /// Fails when the two evaluations differ by more than tail + `quad_tol`.
    pub fn checked(self, quad_tol: f64) -> Result<Self> {
        let tolerance = self.tail_estimate + quad_tol;
        if self.discrepancy > tolerance {
            return Err(Error::Inconsistency {
                what: "cubic coefficient series and bracket forms".into(),
                discrepancy: self.discrepancy,
                tolerance,
            });
        }
        Ok(self)
    }
}

pub fn cubic_coefficient(mu: &DipoleMoment, k: usize, n: usize) -> CubicCoefficient {
    let wide = ModeColumns::new(mu, k, 2 * n);
    let full = wide.cubic();
    let series = cubic_series(&wide.m1[..n], &wide.mk[..n], &wide.s1[..n], &wide.sk[..n], k);
    let bracket = -4.0
        * mu.quadrature().integrate(|x| {
            let d = mu.deriv(x, 1);
            d * d * mu.deriv(x, 2) * eigenfunction_value(1, x) * eigenfunction_value(k, x)
        });
    CubicCoefficient {
        series,
        bracket,
        discrepancy: (series - bracket).abs(),
        tail_estimate: (full - series).abs(),
    }
}
