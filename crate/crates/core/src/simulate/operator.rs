use crate::dipole::{CouplingMatrices, DipoleMoment};
use crate::error::{Error, Result};
use crate::spectral::eigenvalue;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::hash::{Hash, Hasher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Truncated PDE: the auxiliary generator stops at the u_1² term.
    Schrodinger,
    /// Finite-dimensional system: every commutator order is present.
    Matrix,
}

/// Drift eigenvalues and coupling matrices in the drift eigenbasis.
///
/// `d = [M, Λ]`, `s` plays the role of `μ'²` and `r = [M, [M, d]]` is the cubic commutator
/// (zero for the PDE).
#[derive(Debug, Clone)]
pub struct GalerkinOperator {
    pub kind: OperatorKind,
    pub lambda: Vec<f64>,
    pub m: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Columns are the drift eigenvectors in the original coordinates.
    pub basis: DMatrix<f64>,
    m_eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl GalerkinOperator {
    pub fn from_dipole(mu: &DipoleMoment, n: usize) -> Self {
        let c = CouplingMatrices::new(mu, n);
        Self::assemble(
            OperatorKind::Schrodinger,
            (1..=n).map(eigenvalue).collect(),
            c.m,
            c.d,
            c.s,
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
        )
    }

    /// From real symmetric `H_0`, `H_1`; eigenvalues of `H_0` are sorted increasingly.
    pub fn from_matrices(h0: &DMatrix<f64>, h1: &DMatrix<f64>) -> Result<Self> {
        let n = h0.nrows();
        if h0.ncols() != n || h1.nrows() != n || h1.ncols() != n || n == 0 {
            return Err(Error::InvalidArgument("H0 and H1 must be square of equal size".into()));
        }
        for h in [h0, h1] {
            let asym = (h - h.transpose()).amax();
            if asym > 1e-12 * (1.0 + h.amax()) {
                return Err(Error::InvalidArgument(format!("matrix not symmetric (defect {asym:e})")));
            }
        }
        let eig = SymmetricEigen::new(h0.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut v = DMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(i).clone_owned();
            // fix the sign so the largest entry is positive
            let imax = col.iamax();
            if col[imax] < 0.0 {
                col = -col;
            }
            v.set_column(k, &col);
        }
        let m = v.transpose() * h1 * &v;
        let m = (&m + m.transpose()) * 0.5;
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()));
        let d = &m * &lam - &lam * &m;
        let s = (&d * &m - &m * &d) * 0.5;
        let md = &m * &d - &d * &m;
        let r = &m * &md - &md * &m;
        Ok(Self::assemble(OperatorKind::Matrix, lambda, m, d, s, r, v))
    }

    fn assemble(
        kind: OperatorKind,
        lambda: Vec<f64>,
        m: DMatrix<f64>,
        d: DMatrix<f64>,
        s: DMatrix<f64>,
        r: DMatrix<f64>,
        basis: DMatrix<f64>,
    ) -> Self {
        let m_eigen = SymmetricEigen::new(m.clone());
        Self {
            kind,
            lambda,
            m,
            d,
            s,
            r,
            basis,
            m_eigen,
        }
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    /// Stable digest of the eigenvalues and matrices.
    pub fn hash(&self) -> String {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for x in self
            .lambda
            .iter()
            .chain(self.m.iter())
            .chain(self.d.iter())
            .chain(self.s.iter())
        {
            x.to_bits().hash(&mut h);
        }
        format!("{:016x}", h.finish())
    }

    /// `e^{iλ_j t}`.
    pub fn phases(&self, t: f64) -> Vec<Complex64> {
        self.lambda.iter().map(|&l| Complex64::from_polar(1.0, l * t)).collect()
    }

    /// `out += coef · e^{iΛt} A e^{−iΛt} a`.
    pub fn apply_rotated(&self, a_mat: &DMatrix<f64>, t: f64, a: &[Complex64], coef: Complex64, out: &mut [Complex64]) {
        let ph = self.phases(t);
        let b: Vec<Complex64> = a.iter().zip(&ph).map(|(x, p)| x * p.conj()).collect();
        let n = self.modes();
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (col, bc) in b.iter().enumerate() {
            if *bc == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (row, slot) in acc.iter_mut().enumerate() {
                *slot += a_mat[(row, col)] * bc;
            }
        }
        for ((o, s), p) in out.iter_mut().zip(&acc).zip(&ph) {
            *o += coef * p * s;
        }
    }

    pub fn apply_rotated_complex(
        &self,
        a_mat: &DMatrix<Complex64>,
        t: f64,
        a: &[Complex64],
        coef: Complex64,
        out: &mut [Complex64],
    ) {
        let ph = self.phases(t);
        let b = nalgebra::DVector::from_iterator(a.len(), a.iter().zip(&ph).map(|(x, p)| x * p.conj()));
        let acc = a_mat * b;
        for ((o, s), p) in out.iter_mut().zip(acc.iter()).zip(&ph) {
            *o += coef * p * s;
        }
    }

    /// `e^{−iθM} Λ e^{iθM} − Λ` from the eigendecomposition of M.
    pub fn conjugated_drift(&self, theta: f64) -> DMatrix<Complex64> {
        let q = self.m_eigen.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let n = self.modes();
        let e = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.m_eigen.eigenvalues.iter().map(|&w| Complex64::from_polar(1.0, theta * w)),
        ));
        let u = &q * e * q.adjoint();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.lambda.iter().map(|&l| Complex64::new(l, 0.0)),
        ));
        u.adjoint() * &lam * &u - lam
    }

    /// `exp(−iθM)` by scaling and squaring.
    pub fn gauge(&self, theta: f64) -> DMatrix<Complex64> {
        self.m.map(|x| Complex64::new(0.0, -theta * x)).exp()
    }

    /// Schrödinger-picture coefficients from interaction-picture ones.
    pub fn from_interaction(&self, t: f64, a: &[Complex64]) -> Vec<Complex64> {
        a.iter().zip(self.phases(t)).map(|(x, p)| x * p.conj()).collect()
    }

    pub fn to_interaction(&self, t: f64, c: &[Complex64]) -> Vec<Complex64> {
        c.iter().zip(self.phases(t)).map(|(x, p)| x * p).collect()
    }

    pub fn to_eigen(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.modes();
        (0..n)
            .map(|k| (0..n).map(|i| self.basis[(i, k)] * x[i]).sum())
            .collect()
    }

    pub fn from_eigen(&self, c: &[Complex64]) -> Vec<Complex64> {
        let n = self.modes();
        (0..n)
            .map(|i| (0..n).map(|k| self.basis[(i, k)] * c[k]).sum())
            .collect()
    }
}
