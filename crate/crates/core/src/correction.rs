//! Steering the linear components of the endpoint by a windowed trigonometric moment problem.
//!
//! Moments are `∫_{T₀}^{T} v(t) e^{iω_j t} dt` in absolute time; the control itself lives on the
//! local interval `[0, T − T₀]` so it can be appended to an earlier control.

use crate::bump::Bump;
use crate::error::{Error, Result};
use crate::ode::{integrate_complex, OdeOptions};
use crate::quadrature::CellGrid;
use crate::signals::{ControlSignal, Provenance, Term, Trig, CELL_ORDER};
use crate::simulate::{simulate_final, GalerkinOperator};
use crate::spectral::SpectralState;
use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

/// Rejection threshold on the condition number of the row-normalized constraint system.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentTarget {
    pub t0: f64,
    pub t1: f64,
    /// The lost mode, excluded from the targets (1-based).
    pub lost: usize,
    /// Target modes (1-based), increasing.
    pub modes: Vec<usize>,
    pub omega: Vec<f64>,
    /// `d_j`; for the ground mode only the real part is a constraint (the modulus is fixed by
    /// the norm).
    pub moments: Vec<C>,
}

impl MomentTarget {
    pub fn new(t0: f64, t1: f64, lost: usize, modes: Vec<usize>, omega: Vec<f64>, moments: Vec<C>) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::InvalidArgument(format!("empty interval [{t0}, {t1}]")));
        }
        if modes.len() != omega.len() || modes.len() != moments.len() || modes.is_empty() {
            return Err(Error::InvalidArgument("modes, frequencies and moments differ in length".into()));
        }
        if modes.contains(&lost) {
            return Err(Error::InvalidArgument(format!("lost mode {lost} cannot be a target")));
        }
        if modes.windows(2).any(|w| w[0] >= w[1]) || omega.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("modes and frequencies must increase".into()));
        }
        Ok(Self {
            t0,
            t1,
            lost,
            modes,
            omega,
            moments,
        })
    }

    /// Moments whose first-order effect moves the free evolution of `psi_t0` (Schrödinger
    /// coefficients at time `t0`) onto `target` (Schrödinger coefficients at time `t1`) in
    /// every mode but `lost`.
    pub fn from_endpoint(
        op: &GalerkinOperator,
        psi_t0: &SpectralState,
        target: &SpectralState,
        t0: f64,
        t1: f64,
        lost: usize,
    ) -> Result<Self> {
        let n = op.modes();
        check_len(op, psi_t0)?;
        check_len(op, target)?;
        if lost == 0 || lost > n {
            return Err(Error::InvalidArgument(format!("lost mode {lost} outside 1..={n}")));
        }
        let a0 = op.to_interaction(t0, &psi_t0.coefficients);
        let at = op.to_interaction(t1, &target.coefficients);
        let floor = 1e-12 * op.m.amax().max(1.0);
        let mut modes = Vec::new();
        let mut omega = Vec::new();
        let mut moments = Vec::new();
        for j in 1..=n {
            if j == lost {
                continue;
            }
            let mj1 = op.m[(j - 1, 0)];
            if mj1.abs() <= floor {
                return Err(Error::Contract(format!(
                    "mode {j} is not reachable at first order (coupling {mj1:e})"
                )));
            }
            modes.push(j);
            omega.push(op.lambda[j - 1] - op.lambda[0]);
            moments.push((at[j - 1] - a0[j - 1]) / C::new(0.0, mj1));
        }
        Self::new(t0, t1, lost, modes, omega, moments)
    }

    pub fn length(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Real constraint count (two per mode, one for a zero frequency).
    pub fn rows(&self) -> usize {
        self.omega.iter().map(|&w| if w == 0.0 { 1 } else { 2 }).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut t = self.clone();
        t.moments.iter_mut().for_each(|d| *d *= alpha);
        t
    }
}

fn check_len(op: &GalerkinOperator, s: &SpectralState) -> Result<()> {
    if s.len() != op.modes() {
        return Err(Error::InvalidArgument(format!(
            "state has {} modes, operator {}",
            s.len(),
            op.modes()
        )));
    }
    Ok(())
}

/// `w(s)·cos(ω_k s)` and `w(s)·sin(ω_k s)` on `[0, L]`, `w` a smooth bump vanishing to all
/// orders at both ends. A zero frequency contributes the cosine only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowedBasis {
    pub length: f64,
    pub window: Bump,
    pub freqs: Vec<f64>,
}

impl WindowedBasis {
    /// Target frequencies first, then gap midpoints (lowest gaps first) until `size` functions.
    pub fn for_target(target: &MomentTarget, size: usize) -> Self {
        let length = target.length();
        let mut freqs = target.omega.clone();
        let mut gaps: Vec<f64> = std::iter::once(0.0).chain(freqs.iter().copied()).collect();
        gaps.sort_by(f64::total_cmp);
        gaps.dedup();
        let mut extra = Vec::new();
        let count = |f: &[f64]| f.iter().map(|&w| if w == 0.0 { 1 } else { 2 }).sum::<usize>();
        let mut level = 0;
        while count(&freqs) + count(&extra) < size {
            // split each gap into 2^(level+1) parts, lowest first
            let parts = 1usize << (level + 1);
            let mut added = false;
            for w in gaps.windows(2) {
                for p in (1..parts).step_by(2) {
                    if count(&freqs) + count(&extra) >= size {
                        break;
                    }
                    extra.push(w[0] + (w[1] - w[0]) * p as f64 / parts as f64);
                    added = true;
                }
            }
            if !added {
                let top = gaps.last().copied().unwrap_or(0.0);
                let step = std::f64::consts::PI / length;
                extra.push(top + step * (1 + level) as f64);
            }
            level += 1;
        }
        freqs.extend(extra);
        freqs.sort_by(f64::total_cmp);
        Self {
            length,
            window: Bump::on_interval(0.0, length, 1.0, 1.0),
            freqs,
        }
    }

    pub fn len(&self) -> usize {
        self.freqs.iter().map(|&w| if w == 0.0 { 1 } else { 2 }).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Values and first two derivatives of every basis function at `s`.
    pub fn eval(&self, s: f64, out: &mut [[f64; 3]]) {
        let (w0, w1, w2) = if s <= 0.0 || s >= self.length {
            (0.0, 0.0, 0.0)
        } else {
            (self.window.deriv(s, 0), self.window.deriv(s, 1), self.window.deriv(s, 2))
        };
        let mut k = 0;
        for &f in &self.freqs {
            let (sn, cs) = (f * s).sin_cos();
            out[k] = [
                w0 * cs,
                w1 * cs - f * w0 * sn,
                w2 * cs - 2.0 * f * w1 * sn - f * f * w0 * cs,
            ];
            k += 1;
            if f != 0.0 {
                out[k] = [
                    w0 * sn,
                    w1 * sn + f * w0 * cs,
                    w2 * sn + 2.0 * f * w1 * cs - f * f * w0 * sn,
                ];
                k += 1;
            }
        }
    }

    pub fn values(&self, s: f64) -> Vec<f64> {
        let mut buf = vec![[0.0; 3]; self.len()];
        self.eval(s, &mut buf);
        buf.iter().map(|v| v[0]).collect()
    }

    /// The control `Σ c_k b_k` on `[0, L]`.
    pub fn control(&self, coeffs: &[f64]) -> ControlSignal {
        let mut trig = Vec::with_capacity(self.freqs.len());
        let mut k = 0;
        for &f in &self.freqs {
            let a = coeffs[k];
            k += 1;
            let b = if f != 0.0 {
                k += 1;
                coeffs[k - 1]
            } else {
                0.0
            };
            trig.push(Trig { omega: f, a, b });
        }
        let term = Term {
            envelope: self.window.clone(),
            t_ref: 0.0,
            order: 0,
            amplitude: 1.0,
            trig,
        };
        ControlSignal::from_terms(self.length, vec![term], Provenance::MomentSolution)
    }

    fn grid(&self) -> CellGrid {
        let wmax = self.freqs.iter().fold(0.0f64, |m, &w| m.max(w));
        let mut h = self.length / 64.0;
        if wmax > 0.0 {
            h = h.min(std::f64::consts::PI / wmax);
        }
        let cells = (self.length / h).ceil() as usize;
        CellGrid::uniform(0.0, self.length, cells, CELL_ORDER)
    }
}

/// Tabulated basis: quadrature nodes, weights and the value matrices.
struct Tabulated {
    nodes: Vec<f64>,
    /// nodes × basis, weighted by the quadrature weights.
    v0w: DMatrix<f64>,
    gram: DMatrix<f64>,
}

fn tabulate(basis: &WindowedBasis) -> Tabulated {
    let grid = basis.grid();
    let (n, m) = (grid.nodes.len(), basis.len());
    let mut v = [DMatrix::zeros(n, m), DMatrix::zeros(n, m), DMatrix::zeros(n, m)];
    let mut buf = vec![[0.0; 3]; m];
    for (i, &s) in grid.nodes.iter().enumerate() {
        basis.eval(s, &mut buf);
        let sw = grid.weights[i].sqrt();
        for (k, b) in buf.iter().enumerate() {
            for d in 0..3 {
                v[d][(i, k)] = b[d] * sw;
            }
        }
    }
    let gram = v[0].tr_mul(&v[0]) + v[1].tr_mul(&v[1]) + v[2].tr_mul(&v[2]);
    let mut v0w = std::mem::replace(&mut v[0], DMatrix::zeros(0, 0));
    for (i, mut row) in v0w.row_iter_mut().enumerate() {
        row *= grid.weights[i].sqrt();
    }
    Tabulated {
        nodes: grid.nodes,
        v0w,
        gram,
    }
}

/// Rows `∫_0^L (L−s) b_k` and `∫_0^L (L−s)²/2 b_k` (second and third primitives at `L`).
fn boundary_rows(basis: &WindowedBasis, tab: &Tabulated) -> DMatrix<f64> {
    let l = basis.length;
    let n = tab.nodes.len();
    let e = DMatrix::from_fn(2, n, |r, i| {
        let x = l - tab.nodes[i];
        if r == 0 {
            x
        } else {
            0.5 * x * x
        }
    });
    e * &tab.v0w
}

/// Moment rows: `Re`, `Im` of `∫_0^L b_k(s) e^{iω(t₀+s)} ds` (real part only for ω = 0).
fn moment_rows(target: &MomentTarget, tab: &Tabulated) -> (DMatrix<f64>, DVector<f64>) {
    let n = tab.nodes.len();
    let rows = target.rows();
    let mut e = DMatrix::zeros(rows, n);
    let mut r = DVector::zeros(rows);
    let mut row = 0;
    for (w, d) in target.omega.iter().zip(&target.moments) {
        for i in 0..n {
            let (sn, cs) = (w * (target.t0 + tab.nodes[i])).sin_cos();
            e[(row, i)] = cs;
            if *w != 0.0 {
                e[(row + 1, i)] = sn;
            }
        }
        r[row] = d.re;
        row += 1;
        if *w != 0.0 {
            r[row] = d.im;
            row += 1;
        }
    }
    (e * &tab.v0w, r)
}

/// Minimizes `cᵀ G c` subject to `A c = r`; returns the solution and the condition number of
/// the row-normalized system in the `G` metric.
pub fn least_norm(gram: &DMatrix<f64>, a: &DMatrix<f64>, r: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let chol = nalgebra::Cholesky::new(gram.clone())
        .ok_or_else(|| Error::IllConditioned { condition: f64::INFINITY })?;
    let l = chol.l();
    // Ã = A L^{-T}
    let x = l
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| Error::IllConditioned { condition: f64::INFINITY })?;
    let mut at = x.transpose();
    let mut rs = r.clone();
    for i in 0..at.nrows() {
        let nrm = at.row(i).norm();
        if nrm == 0.0 {
            return Err(Error::IllConditioned { condition: f64::INFINITY });
        }
        at.row_mut(i).unscale_mut(nrm);
        rs[i] /= nrm;
    }
    let svd = at.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let y = svd
        .solve(&rs, 0.0)
        .map_err(|e| Error::Integration(format!("pseudo-inverse failed: {e}")))?;
    let c = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::IllConditioned { condition: f64::INFINITY })?;
    Ok((c, condition))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEntry {
    pub m: i32,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub t0: f64,
    pub t1: f64,
    /// Control on the local interval `[0, t1 − t0]`.
    pub control: ControlSignal,
    pub basis: WindowedBasis,
    pub coefficients: Vec<f64>,
    /// Max absolute violation of the moment equalities and boundary rows of the linear solve.
    pub moment_residual: f64,
    pub condition: f64,
    /// `[u_1, u_2, u_3]` at the end of the interval.
    pub primitives_at_end: [f64; 3],
    /// `‖u‖_{H^m}`, m = −3..=2.
    pub norms: Vec<NormEntry>,
    /// Endpoint error on the controlled components after re-simulation, if performed.
    pub projected_residual: Option<f64>,
    /// Newton re-corrections performed after the moment solve.
    pub passes: usize,
    /// Residual after the moment solve and after each re-correction.
    pub residual_trace: Vec<f64>,
}

impl CorrectionResult {
    fn build(
        t0: f64,
        t1: f64,
        basis: WindowedBasis,
        coeffs: &DVector<f64>,
        moment_residual: f64,
        condition: f64,
    ) -> Self {
        let coefficients: Vec<f64> = coeffs.iter().copied().collect();
        let control = basis.control(&coefficients);
        let primitives_at_end = [
            control.primitive_end(1),
            control.primitive_end(2),
            control.primitive_end(3),
        ];
        let norms = (-3..=2)
            .map(|m| NormEntry {
                m,
                value: control.sobolev_norm(m),
            })
            .collect();
        Self {
            t0,
            t1,
            control,
            basis,
            coefficients,
            moment_residual,
            condition,
            primitives_at_end,
            norms,
            projected_residual: None,
            passes: 0,
            residual_trace: Vec::new(),
        }
    }

    pub fn norm(&self, m: i32) -> Option<f64> {
        self.norms.iter().find(|e| e.m == m).map(|e| e.value)
    }
}

/// Default basis size: two more functions than the constraints need.
pub fn default_basis_size(target: &MomentTarget) -> usize {
    2 * target.modes.len() + 3
}

/// Least-H²-norm control on `[t0, t1]` with the prescribed moments and `u_2 = u_3 = 0` at the
/// end.
pub fn solve_moment_problem(target: &MomentTarget, basis_size: usize) -> Result<CorrectionResult> {
    let need = 2 * target.modes.len() + 3;
    if basis_size < need {
        return Err(Error::InvalidArgument(format!(
            "basis size {basis_size} below the minimum {need}"
        )));
    }
    let basis = WindowedBasis::for_target(target, basis_size);
    let tab = tabulate(&basis);
    let (mrows, r) = moment_rows(target, &tab);
    let brows = boundary_rows(&basis, &tab);
    let a = stack(&mrows, &brows);
    let rhs = DVector::from_iterator(a.nrows(), r.iter().copied().chain([0.0, 0.0]));
    if rhs.iter().all(|&x| x == 0.0) {
        let zero = DVector::zeros(basis.len());
        return Ok(CorrectionResult::build(target.t0, target.t1, basis, &zero, 0.0, 1.0));
    }
    let (c, condition) = least_norm(&tab.gram, &a, &rhs)?;
    let resid = (&a * &c - &rhs).amax();
    Ok(CorrectionResult::build(target.t0, target.t1, basis, &c, resid, condition))
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrectionConfig {
    /// Basis size; `None` uses [`default_basis_size`].
    pub basis_size: Option<usize>,
    /// Required endpoint error on the controlled components.
    pub tolerance: f64,
    pub max_passes: usize,
    /// Linear-regime radius for the distance of the start and end points to the target.
    pub radius: f64,
    pub ode: OdeOptions,
    /// Integrator tolerance for the variational (Jacobian) system.
    pub jacobian_tol: f64,
    /// Bound on `‖M‖_F ∫|u|` for the moment solution; beyond it the linearization is
    /// meaningless and the correction is rejected before any nonlinear run.
    pub max_rotation: f64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            basis_size: None,
            tolerance: 1e-8,
            max_passes: 5,
            radius: 0.05,
            ode: OdeOptions::with_tol(1e-12),
            jacobian_tol: 1e-10,
            max_rotation: 10.0,
        }
    }
}

/// Controlled components of the endpoint error: for the ground mode the phase mismatch
/// `Im(a₁ conj(t̂₁))`, for every other mode but `lost` the real and imaginary parts of
/// `a_j − t_j` (interaction coordinates at the final time).
fn endpoint_error(a: &[C], t: &[C], lost: usize) -> DVector<f64> {
    let mut out = Vec::with_capacity(2 * a.len());
    let t1 = t[0] / t[0].norm();
    out.push((a[0] * t1.conj()).im);
    for j in 1..a.len() {
        if j + 1 == lost {
            continue;
        }
        let d = a[j] - t[j];
        out.push(d.re);
        out.push(d.im);
    }
    DVector::from_vec(out)
}

/// Same map applied to a variation `δa` (linear).
fn endpoint_variation(da: &[C], t: &[C], lost: usize) -> DVector<f64> {
    let mut out = Vec::with_capacity(2 * da.len());
    let t1 = t[0] / t[0].norm();
    out.push((da[0] * t1.conj()).im);
    for j in 1..da.len() {
        if j + 1 == lost {
            continue;
        }
        out.push(da[j].re);
        out.push(da[j].im);
    }
    DVector::from_vec(out)
}

/// `∂a(T)/∂c_k` for every basis function along the trajectory driven by `v`, via the
/// variational equations in the interaction picture.
fn jacobian(
    op: &GalerkinOperator,
    basis: &WindowedBasis,
    v: &ControlSignal,
    psi_t0: &[C],
    t0: f64,
    tol: f64,
) -> Result<DMatrix<C>> {
    let n = op.modes();
    let m = basis.len();
    let mc = op.m.map(|x| C::new(x, 0.0));
    let mut y0 = vec![C::new(0.0, 0.0); n * (m + 1)];
    y0[..n].copy_from_slice(psi_t0);
    let f = |s: f64, y: &[C], dy: &mut [C]| {
        let ph = op.phases(s);
        let rot = DMatrix::from_fn(n, n, |j, k| mc[(j, k)] * ph[j] * ph[k].conj());
        let yv = DMatrixView::from_slice(y, n, m + 1);
        let mut dv = DMatrixViewMut::from_slice(dy, n, m + 1);
        dv.gemm(C::new(0.0, v.eval(s)), &rot, &yv, C::new(0.0, 0.0));
        let mut buf = vec![[0.0; 3]; m];
        basis.eval(s, &mut buf);
        let ra = &rot * yv.column(0);
        for (k, b) in buf.iter().enumerate() {
            if b[0] != 0.0 {
                let coef = C::new(0.0, b[0]);
                for j in 0..n {
                    dv[(j, k + 1)] += coef * ra[j];
                }
            }
        }
    };
    let mut breaks = v.feature_points();
    if breaks.first() != Some(&0.0) {
        breaks.insert(0, 0.0);
    }
    if breaks.last() != Some(&basis.length) {
        breaks.push(basis.length);
    }
    let y = integrate_complex(f, &breaks, &y0, &OdeOptions::with_tol(tol))?;
    let ph0 = op.phases(t0);
    Ok(DMatrix::from_fn(n, m, |j, k| y[(k + 1) * n + j] * ph0[j]))
}

/// Endpoint (interaction coordinates at `t1`) of the run from `psi_t0` under the local control.
fn endpoint(op: &GalerkinOperator, v: &ControlSignal, psi_t0: &SpectralState, t1: f64, opts: &OdeOptions) -> Result<Vec<C>> {
    let start = SpectralState::new(psi_t0.coefficients.clone(), 0.0);
    let end = simulate_final(op, v, &start, opts)?;
    Ok(op.to_interaction(t1, &end.coefficients))
}

/// Steers every component of the endpoint except `lost` onto `target` (Schrödinger
/// coefficients at `t1`), starting from `psi_t0` (Schrödinger coefficients at `t0`).
/// The ground mode is matched in phase only.
pub fn correct_linear_components(
    op: &GalerkinOperator,
    psi_t0: &SpectralState,
    target: &SpectralState,
    t0: f64,
    t1: f64,
    lost: usize,
    cfg: &CorrectionConfig,
) -> Result<CorrectionResult> {
    let mt = MomentTarget::from_endpoint(op, psi_t0, target, t0, t1, lost)?;
    let a0 = op.to_interaction(t0, &psi_t0.coefficients);
    let at = op.to_interaction(t1, &target.coefficients);
    let start_dist = a0
        .iter()
        .zip(&at)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if start_dist > cfg.radius {
        return Err(Error::OutOfNeighborhood {
            distance: start_dist,
            radius: cfg.radius,
        });
    }
    let free = endpoint_error(&a0, &at, lost);
    // phases of the free evolution are only exact to round-off
    if free.amax() <= 16.0 * f64::EPSILON {
        let mut res = solve_moment_problem(&mt.scaled(0.0), cfg.basis_size.unwrap_or(default_basis_size(&mt)))?;
        res.projected_residual = Some(0.0);
        res.residual_trace = vec![0.0];
        return Ok(res);
    }
    let size = cfg.basis_size.unwrap_or(default_basis_size(&mt));
    let first = solve_moment_problem(&mt, size)?;
    let rotation = op.m.norm() * first.control.integrate(|_, r| r[0].abs());
    if rotation > cfg.max_rotation {
        return Err(Error::OutOfNeighborhood {
            distance: rotation,
            radius: cfg.max_rotation,
        });
    }
    let basis = first.basis.clone();
    let tab = tabulate(&basis);
    let brows = boundary_rows(&basis, &tab);
    let mut coeffs = DVector::from_vec(first.coefficients.clone());
    let mut condition = first.condition;
    let mut control = first.control.clone();
    let mut a_end = endpoint(op, &control, psi_t0, t1, &cfg.ode)?;
    let mut err = endpoint_error(&a_end, &at, lost);
    let mut trace = vec![err.norm()];
    let mut jac: Option<DMatrix<f64>> = None;
    let mut passes = 0;
    while err.norm() >= cfg.tolerance && passes < cfg.max_passes {
        let dist = a_end
            .iter()
            .zip(&at)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if dist > cfg.radius {
            return Err(Error::OutOfNeighborhood {
                distance: dist,
                radius: cfg.radius,
            });
        }
        // chord steps reuse the Jacobian while they contract by at least a factor 10
        let stale = trace.len() >= 2 && trace[trace.len() - 1] > 0.1 * trace[trace.len() - 2];
        if jac.is_none() || stale {
            let jc = jacobian(op, &basis, &control, &psi_t0.coefficients, t0, cfg.jacobian_tol)?;
            let cols: Vec<DVector<f64>> = (0..basis.len())
                .map(|k| {
                    let col: Vec<C> = jc.column(k).iter().copied().collect();
                    endpoint_variation(&col, &at, lost)
                })
                .collect();
            jac = Some(DMatrix::from_columns(&cols));
        }
        let j = jac.as_ref().expect("jacobian computed above");
        let a = stack(j, &brows);
        let bc = &brows * &coeffs;
        let rhs = DVector::from_iterator(a.nrows(), err.iter().map(|x| -x).chain(bc.iter().map(|x| -x)));
        let (delta, cond) = least_norm(&tab.gram, &a, &rhs)?;
        condition = condition.max(cond);
        coeffs += delta;
        control = basis.control(coeffs.as_slice());
        a_end = endpoint(op, &control, psi_t0, t1, &cfg.ode)?;
        err = endpoint_error(&a_end, &at, lost);
        trace.push(err.norm());
        passes += 1;
    }
    let final_err = err.norm();
    if final_err >= cfg.tolerance {
        return Err(Error::OutOfNeighborhood {
            distance: final_err,
            radius: cfg.tolerance,
        });
    }
    let mut res = CorrectionResult::build(t0, t1, basis, &coeffs, first.moment_residual, condition);
    res.projected_residual = Some(final_err);
    res.passes = passes;
    res.residual_trace = trace;
    Ok(res)
}

/// Endpoint error on the controlled components for a full run ending at `t1`.
pub fn projected_error(op: &GalerkinOperator, end: &SpectralState, target: &SpectralState, t1: f64, lost: usize) -> f64 {
    let a = op.to_interaction(t1, &end.coefficients);
    let t = op.to_interaction(t1, &target.coefficients);
    endpoint_error(&a, &t, lost).norm()
}
