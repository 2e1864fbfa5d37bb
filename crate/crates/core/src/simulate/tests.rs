use super::*;
use crate::bump::Bump;
use crate::dipole::{Atom, DipoleMoment};
use crate::signals::{Provenance, Term, Trig};
use crate::spectral::Spectrum;

fn dipole() -> DipoleMoment {
    DipoleMoment::new(vec![Atom::bump(0.4, 0.3, 1.0), Atom::bump(0.7, 0.2, -0.5)])
}

fn pulse(alpha: f64, horizon: f64, omega: f64) -> ControlSignal {
    let term = Term {
        envelope: Bump::on_interval(0.05 * horizon, 0.95 * horizon, 1.0, 1.0),
        t_ref: 0.0,
        order: 0,
        amplitude: alpha,
        trig: vec![Trig { omega, a: 1.0, b: 0.3 }],
    };
    ControlSignal::from_terms(horizon, vec![term], Provenance::Analytic)
}

fn ground(n: usize) -> SpectralState {
    Spectrum::new(n).eigenstate(1, 0.0)
}

fn opts() -> OdeOptions {
    OdeOptions::with_tol(1e-12)
}

#[test]
fn free_evolution_of_ground_state() {
    let op = GalerkinOperator::from_dipole(&dipole(), 12);
    let u = ControlSignal::zero(0.3);
    let s = simulate_final(&op, &u, &ground(12), &opts()).unwrap();
    let expected = Complex64::from_polar(1.0, -std::f64::consts::PI.powi(2) * 0.3);
    assert!((s.coefficients[0] - expected).norm() < 1e-13);
    assert!(s.coefficients[1..].iter().all(|c| c.norm() < 1e-15));
}

#[test]
fn norm_is_conserved() {
    let op = GalerkinOperator::from_dipole(&dipole(), 30);
    let u = pulse(3.0, 0.4, 40.0);
    let tr = simulate(&op, &u, &ground(30), &[0.1, 0.2, 0.4], &opts()).unwrap();
    assert!(tr.norm_drift < 1e-10, "drift {}", tr.norm_drift);
    // the control really moved the state
    assert!(tr.last().coefficients[1].norm() > 1e-3);
}

#[test]
fn rejects_unnormalized_initial_state() {
    let op = GalerkinOperator::from_dipole(&dipole(), 8);
    let psi = ground(8).scale(Complex64::new(2.0, 0.0));
    assert!(simulate(&op, &ControlSignal::zero(0.1), &psi, &[0.1], &opts()).is_err());
}

#[test]
fn semigroup_property() {
    let op = GalerkinOperator::from_dipole(&dipole(), 20);
    let u = pulse(2.0, 0.3, 25.0);
    let v = pulse(-1.5, 0.2, 10.0);
    let uv = u.concatenate(&v);
    let direct = simulate_final(&op, &uv, &ground(20), &opts()).unwrap();
    let mid = simulate_final(&op, &u, &ground(20), &opts()).unwrap();
    let mid = SpectralState::new(mid.coefficients, 0.0);
    let second = simulate_final(&op, &v, &mid, &opts()).unwrap();
    let gap = direct.sub(&SpectralState::new(second.coefficients, direct.time)).l2_norm();
    assert!(gap < 1e-10, "gap {gap}");
}

#[test]
fn first_order_prediction_has_quadratic_residual() {
    let n = 20;
    let op = GalerkinOperator::from_dipole(&dipole(), n);
    let horizon = 0.2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for alpha in [1e-1, 3e-2, 1e-2, 3e-3] {
        let u = pulse(alpha, horizon, 15.0);
        let psi = simulate_final(&op, &u, &ground(n), &opts()).unwrap();
        let bundle = expansion_terms(&op, &u, &[horizon], &opts(), 1e-9).unwrap();
        let free = Spectrum::new(n).eigenstate(1, horizon);
        let res = psi.sub(&free).sub(&bundle.psi_explicit[0]).l2_norm();
        xs.push(alpha);
        ys.push(res);
    }
    let fit = crate::signals::loglog_fit(&xs, &ys).unwrap();
    assert!((fit.slope - 2.0).abs() < 0.05, "slope {}", fit.slope);
}

#[test]
fn zero_control_gives_zero_expansion() {
    let op = GalerkinOperator::from_dipole(&dipole(), 10);
    let b = expansion_terms(&op, &ControlSignal::zero(0.2), &[0.1, 0.2], &opts(), 1e-12).unwrap();
    for v in [&b.psi, &b.xi, &b.zeta, &b.psi_aux, &b.xi_aux, &b.zeta_aux] {
        assert!(v.iter().all(|s| s.l2_norm() == 0.0));
    }
}

#[test]
fn expansion_link_and_explicit_forms() {
    let op = GalerkinOperator::from_dipole(&dipole(), 30);
    let u = pulse(0.5, 0.3, 20.0);
    let tol = 1e-12;
    let b = expansion_terms(&op, &u, &[0.1, 0.17, 0.3], &OdeOptions::with_tol(tol), 1e-9).unwrap();
    assert!(b.link_defect < 10.0 * tol * 10.0, "link {}", b.link_defect);
    assert!(b.explicit_gap < 1e-10, "explicit {}", b.explicit_gap);
}

#[test]
fn expansion_remainders_have_orders_two_and_four() {
    let n = 20;
    let op = GalerkinOperator::from_dipole(&dipole(), n);
    let horizon = 0.25;
    let (mut xs, mut r2, mut r4, mut a2, mut a4) = (vec![], vec![], vec![], vec![], vec![]);
    for alpha in [8.0, 4.0, 2.0, 1.0] {
        let u = pulse(alpha, horizon, 12.0);
        let psi = simulate_final(&op, &u, &ground(n), &opts()).unwrap();
        let aux = simulate_auxiliary(&op, &u, &ground(n), &[horizon], &opts(), f64::INFINITY)
            .unwrap()
            .trajectory
            .states
            .remove(0);
        let b = expansion_terms(&op, &u, &[horizon], &opts(), 1e-9).unwrap();
        let free = Spectrum::new(n).eigenstate(1, horizon);
        let d1 = psi.sub(&free).sub(&b.psi[0]);
        let d3 = d1.sub(&b.xi[0]).sub(&b.zeta[0]);
        let e1 = aux.sub(&free).sub(&b.psi_aux[0]);
        let e3 = e1.sub(&b.xi_aux[0]).sub(&b.zeta_aux[0]);
        xs.push(alpha);
        r2.push(d1.l2_norm());
        r4.push(d3.l2_norm());
        a2.push(e1.l2_norm());
        a4.push(e3.l2_norm());
    }
    for (ys, order) in [(&r2, 2.0), (&r4, 4.0), (&a2, 2.0), (&a4, 4.0)] {
        let fit = crate::signals::loglog_fit(&xs, ys).unwrap();
        assert!(fit.slope >= order - 0.05, "order {order}: slope {}", fit.slope);
    }
}

#[test]
fn auxiliary_matches_direct_when_primitive_vanishes() {
    // a derivative of a bump integrates to zero
    let term = Term {
        envelope: Bump::on_interval(0.02, 0.28, 1.0, 1.0),
        t_ref: 0.0,
        order: 1,
        amplitude: 0.05,
        trig: vec![Trig { omega: 0.0, a: 1.0, b: 0.0 }],
    };
    let u = ControlSignal::from_terms(0.3, vec![term], Provenance::Analytic);
    assert!(u.primitive_end(1).abs() < 1e-15);
    let mut gaps = Vec::new();
    for n in [10, 20, 40] {
        let op = GalerkinOperator::from_dipole(&dipole(), n);
        let run = simulate_auxiliary(&op, &u, &ground(n), &[0.15, 0.3], &opts(), 1e-3).unwrap();
        let direct = simulate_final(&op, &u, &ground(n), &opts()).unwrap();
        gaps.push(run.trajectory.last().sub(&direct).l2_norm());
        assert!(run.trajectory.norm_drift < 1e-10);
    }
    // the two truncations differ only through the discarded modes
    assert!(gaps[2] < 0.1 * gaps[0], "{gaps:?}");
    assert!(gaps[2] < 1e-7, "{gaps:?}");
}

#[test]
fn auxiliary_without_control_is_free() {
    let op = GalerkinOperator::from_dipole(&dipole(), 10);
    let run = simulate_auxiliary(&op, &ControlSignal::zero(0.5), &ground(10), &[0.5], &opts(), 1e-12).unwrap();
    let free = Spectrum::new(10).eigenstate(1, 0.5);
    assert!(run.trajectory.last().sub(&free).l2_norm() < 1e-13);
}

fn toy_matrices() -> (DMatrix<f64>, DMatrix<f64>) {
    let h0 = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 3.0, 0.1, 0.0, 0.1, 6.0]);
    let h1 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 1.0, 0.3, 0.7, 0.5, 0.7, -0.2]);
    (h0, h1)
}

#[test]
fn bilinear_ode_free_and_norm() {
    let (h0, h1) = toy_matrices();
    let x0 = vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8), Complex64::new(0.0, 0.0)];
    let free = simulate_bilinear_ode(&h0, &h1, &ControlSignal::zero(2.0), &x0, &[2.0], &opts()).unwrap();
    let prop = h0.map(|x| Complex64::new(0.0, -2.0 * x)).exp();
    let expected = prop * nalgebra::DVector::from_vec(x0.clone());
    let gap: f64 = free.last().coefficients.iter().zip(expected.iter()).map(|(a, b)| (a - b).norm()).sum();
    assert!(gap < 1e-11, "gap {gap}");
    let driven = simulate_bilinear_ode(&h0, &h1, &pulse(2.0, 2.0, 3.0), &x0, &[1.0, 2.0], &opts()).unwrap();
    assert!(driven.norm_drift < 1e-10);
}

#[test]
fn bilinear_first_order_matches_duhamel() {
    let (h0, h1) = toy_matrices();
    let op = GalerkinOperator::from_matrices(&h0, &h1).unwrap();
    let horizon = 1.5;
    let g = op.basis.column(0).map(|x| Complex64::new(x, 0.0));
    let mut xs = vec![];
    let mut ys = vec![];
    for alpha in [1e-1, 3e-2, 1e-2] {
        let u = pulse(alpha, horizon, 4.0);
        let x = simulate_bilinear_ode(&h0, &h1, &u, g.as_slice(), &[horizon], &opts()).unwrap();
        let c = op.to_eigen(&x.last().coefficients);
        // Duhamel: c_j(T) - δ_j1 e^{-iλ_1T} = i M_j1 ∫u e^{i(λ_j-λ_1)t} dt e^{-iλ_j T}
        let mut res = 0.0;
        for j in 0..3 {
            let w = op.lambda[j] - op.lambda[0];
            let re = u.integrate(|t, r| r[0] * (w * t).cos());
            let im = u.integrate(|t, r| r[0] * (w * t).sin());
            let lin = Complex64::new(0.0, 1.0) * op.m[(j, 0)] * Complex64::new(re, im)
                * Complex64::from_polar(1.0, -op.lambda[j] * horizon);
            let base = if j == 0 { Complex64::from_polar(1.0, -op.lambda[0] * horizon) } else { Complex64::new(0.0, 0.0) };
            res += (c[j] - base - lin).norm_sqr();
        }
        xs.push(alpha);
        ys.push(res.sqrt());
    }
    let fit = crate::signals::loglog_fit(&xs, &ys).unwrap();
    assert!(fit.slope > 1.95, "slope {}", fit.slope);
}

#[test]
fn bilinear_auxiliary_gauge_is_exact() {
    let (h0, h1) = toy_matrices();
    let op = GalerkinOperator::from_matrices(&h0, &h1).unwrap();
    let u = pulse(1.0, 1.0, 5.0);
    let psi0 = SpectralState::new(vec![Complex64::new(1.0, 0.0), 0.0.into(), 0.0.into()], 0.0);
    let run = simulate_auxiliary(&op, &u, &psi0, &[0.5, 1.0], &opts(), 1e-10).unwrap();
    assert!(run.gauge_mismatch < 1e-10);
}

#[test]
fn matrix_commutators() {
    let (h0, h1) = toy_matrices();
    let op = GalerkinOperator::from_matrices(&h0, &h1).unwrap();
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(op.lambda.clone()));
    let back = &op.basis * &lam * op.basis.transpose();
    assert!((back - &h0).amax() < 1e-12);
    assert!((&op.d + op.d.transpose()).amax() < 1e-12);
    assert!((&op.s - op.s.transpose()).amax() < 1e-12);
}

#[test]
fn tm3_closed_forms() {
    let u = ControlSignal::constant(1.0, 1.0);
    let out = simulate_toy(ToyModel::Tm3, &u, &opts()).unwrap();
    let [x4, x5] = out.closed_form.unwrap();
    assert!((x4 - (1.0 / 252.0 + 0.1)).abs() < 1e-12);
    assert!((x5 - (1.0 / 2016.0 + 1.0 / 60.0)).abs() < 1e-12);
    assert!((out.state[3] - x4).abs() < 1e-10);
    assert!((out.state[4] - x5).abs() < 1e-10);
}

#[test]
fn sussmann_unit_control() {
    let out = simulate_toy(ToyModel::Sussmann, &ControlSignal::constant(1.0, 1.0), &opts()).unwrap();
    assert!((out.state[2] - 0.3).abs() < 1e-11);
}

#[test]
fn tm1_drift_is_positive() {
    let out = simulate_toy(ToyModel::Tm1, &pulse(0.3, 1.0, 7.0), &opts()).unwrap();
    assert!(out.state[1] > 0.0);
}

#[test]
fn trajectory_csv_columns() {
    let op = GalerkinOperator::from_dipole(&dipole(), 2);
    let tr = simulate(&op, &ControlSignal::zero(0.1), &ground(2), &[0.0, 0.1], &opts()).unwrap();
    let csv = tr.to_csv();
    assert!(csv.starts_with("t,re_c1,im_c1,re_c2,im_c2\n"));
    assert_eq!(csv.lines().count(), 3);
    let m = RunManifest::new(&op, &ControlSignal::zero(0.1), &opts(), 2);
    assert_eq!(m.operator_hash, op.hash());
}
