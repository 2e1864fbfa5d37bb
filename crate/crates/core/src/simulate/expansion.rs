use super::{integrate_recording, GalerkinOperator, OperatorKind, I};
use crate::error::{Error, Result};
use crate::ode::OdeOptions;
use crate::sampled::SampledControl;
use crate::signals::ControlSignal;
use crate::spectral::SpectralState;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// First, second and third order terms around the ground-state trajectory, for the direct
/// system and for the auxiliary one, at the requested times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionBundle {
    pub times: Vec<f64>,
    pub psi: Vec<SpectralState>,
    pub xi: Vec<SpectralState>,
    pub zeta: Vec<SpectralState>,
    pub psi_aux: Vec<SpectralState>,
    pub xi_aux: Vec<SpectralState>,
    pub zeta_aux: Vec<SpectralState>,
    /// First order terms from the closed-form oscillatory integrals.
    pub psi_explicit: Vec<SpectralState>,
    pub psi_aux_explicit: Vec<SpectralState>,
    /// Largest gap between the closed-form and integrated first order terms.
    pub explicit_gap: f64,
    /// Largest defect of `Ψ̃ = Ψ − i u_1 μ ψ_1`.
    pub link_defect: f64,
}

fn zeros(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); n]
}

fn max_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Cascaded integration of the expansion systems, cross-checked against the explicit first
/// order formulas. Fails when the two first-order paths differ by more than `check_tol`.
pub fn expansion_terms(
    op: &GalerkinOperator,
    u: &ControlSignal,
    times: &[f64],
    opts: &OdeOptions,
    check_tol: f64,
) -> Result<ExpansionBundle> {
    let n = op.modes();
    let mut e1 = zeros(n);
    e1[0] = Complex64::new(1.0, 0.0);
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        dy.fill(Complex64::new(0.0, 0.0));
        let ut = u.eval(t);
        let u1 = u.primitive_at(1, t);
        let (a, b) = y.split_at(3 * n);
        let (da, db) = dy.split_at_mut(3 * n);
        if ut != 0.0 {
            let c = I * ut;
            op.apply_rotated(&op.m, t, &e1, c, &mut da[..n]);
            op.apply_rotated(&op.m, t, &a[..n], c, &mut da[n..2 * n]);
            op.apply_rotated(&op.m, t, &a[n..2 * n], c, &mut da[2 * n..]);
        }
        if u1 != 0.0 {
            let c1 = Complex64::new(-u1, 0.0);
            let c2 = -I * u1 * u1;
            op.apply_rotated(&op.d, t, &e1, c1, &mut db[..n]);
            op.apply_rotated(&op.d, t, &b[..n], c1, &mut db[n..2 * n]);
            op.apply_rotated(&op.s, t, &e1, c2, &mut db[n..2 * n]);
            op.apply_rotated(&op.d, t, &b[n..2 * n], c1, &mut db[2 * n..]);
            op.apply_rotated(&op.s, t, &b[..n], c2, &mut db[2 * n..]);
            if op.kind == OperatorKind::Matrix {
                let c3 = Complex64::new(u1 * u1 * u1 / 6.0, 0.0);
                op.apply_rotated(&op.r, t, &e1, c3, &mut db[2 * n..]);
            }
        }
    };
    let ys = integrate_recording(rhs, u, times, zeros(6 * n), opts)?;

    // closed-form first order terms on a grid resolving the fastest mode
    let wmax = op.lambda.iter().map(|l| (l - op.lambda[0]).abs()).fold(0.0, f64::max);
    let h = if wmax > 0.0 { std::f64::consts::PI / wmax } else { 1.0 };
    let sc = SampledControl::new(u, h, times);
    let mut explicit = Vec::with_capacity(times.len());
    let mut explicit_aux = Vec::with_capacity(times.len());
    let mut ints = Vec::with_capacity(n);
    let mut ints1 = Vec::with_capacity(n);
    for j in 0..n {
        let w = op.lambda[j] - op.lambda[0];
        let f: Vec<Complex64> = sc
            .nodes()
            .iter()
            .zip(&sc.prim[0])
            .map(|(&t, &v)| v * Complex64::from_polar(1.0, w * t))
            .collect();
        let f1: Vec<Complex64> = sc
            .nodes()
            .iter()
            .zip(&sc.prim[1])
            .map(|(&t, &v)| v * Complex64::from_polar(1.0, w * t))
            .collect();
        ints.push(sc.grid.running_integral(&f, Complex64::new(0.0, 0.0)).1);
        ints1.push(sc.grid.running_integral(&f1, Complex64::new(0.0, 0.0)).1);
    }
    for &t in times {
        let e = sc.edge_index(t.min(sc.horizon()));
        let mut a = zeros(n);
        let mut b = zeros(n);
        for j in 0..n {
            let (g, g1) = if e == 0 {
                (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (ints[j][e - 1], ints1[j][e - 1])
            };
            a[j] = I * op.m[(j, 0)] * g;
            b[j] = (op.lambda[j] - op.lambda[0]) * op.m[(j, 0)] * g1;
        }
        explicit.push(a);
        explicit_aux.push(b);
    }

    let mut gap = 0.0f64;
    let mut link = 0.0f64;
    for (k, &t) in times.iter().enumerate() {
        let y = &ys[k];
        gap = gap.max(max_gap(&y[..n], &explicit[k]));
        gap = gap.max(max_gap(&y[3 * n..4 * n], &explicit_aux[k]));
        let u1 = u.primitive_at(1, t);
        let mut linked = y[..n].to_vec();
        op.apply_rotated(&op.m, t, &e1, -I * u1, &mut linked);
        link = link.max(max_gap(&y[3 * n..4 * n], &linked));
    }
    if gap > check_tol {
        return Err(Error::Inconsistency {
            what: "explicit vs integrated first-order term".into(),
            discrepancy: gap,
            tolerance: check_tol,
        });
    }
    let states = |off: usize| -> Vec<SpectralState> {
        times
            .iter()
            .zip(&ys)
            .map(|(&t, y)| SpectralState::new(op.from_interaction(t, &y[off * n..(off + 1) * n]), t))
            .collect()
    };
    let wrap = |v: &[Vec<Complex64>]| -> Vec<SpectralState> {
        times
            .iter()
            .zip(v)
            .map(|(&t, a)| SpectralState::new(op.from_interaction(t, a), t))
            .collect()
    };
    Ok(ExpansionBundle {
        times: times.to_vec(),
        psi: states(0),
        xi: states(1),
        zeta: states(2),
        psi_aux: states(3),
        xi_aux: states(4),
        zeta_aux: states(5),
        psi_explicit: wrap(&explicit),
        psi_aux_explicit: wrap(&explicit_aux),
        explicit_gap: gap,
        link_defect: link,
    })
}
