use super::*;
use crate::bump::Bump;
use crate::dipole::{Atom, DipoleMoment, ModeColumns};
use crate::ode::OdeOptions;
use crate::signals::{Provenance, Term, Trig};
use crate::simulate::expansion_terms;
use crate::spectral::Spectrum;
use nalgebra::DMatrix;

fn dipole() -> DipoleMoment {
    DipoleMoment::new(vec![Atom::bump(0.4, 0.3, 1.0), Atom::bump(0.7, 0.2, -0.5)])
}

/// Third derivative of a bump wave packet: u_1, u_2, u_3 all vanish at both ends.
fn compliant(alpha: f64, horizon: f64, omega: f64) -> ControlSignal {
    let term = Term {
        envelope: Bump::on_interval(0.05 * horizon, 0.95 * horizon, 1.0, 1.0),
        t_ref: 0.0,
        order: 3,
        amplitude: alpha,
        trig: vec![Trig { omega, a: 1.0, b: 0.4 }],
    };
    ControlSignal::from_terms(horizon, vec![term], Provenance::Analytic)
}

fn plain(alpha: f64, horizon: f64) -> ControlSignal {
    let term = Term {
        envelope: Bump::on_interval(0.1 * horizon, 0.9 * horizon, 1.0, 1.0),
        t_ref: 0.0,
        order: 0,
        amplitude: alpha,
        trig: vec![Trig { omega: 9.0, a: 1.0, b: 0.0 }],
    };
    ControlSignal::from_terms(horizon, vec![term], Provenance::Analytic)
}

#[test]
fn zero_control_gives_zero_terms() {
    let op = GalerkinOperator::from_dipole(&dipole(), 12);
    let u = ControlSignal::zero(0.2);
    for j in [2, 5] {
        assert_eq!(quad_term_direct(&op, &u, j).unwrap(), ZERO);
        assert_eq!(quad_term_ipp(&op, &u, j).unwrap(), ZERO);
        assert_eq!(cubic_term_kernels(&op, &u, j).unwrap(), ZERO);
    }
    let h = heuristic_leading(&u, 1.0, 1.0);
    assert_eq!(h.total(), ZERO);
    let z = ControlSignal::zero(0.1).concatenate(&ControlSignal::zero(0.1));
    assert_eq!(non_overlap_delta(&z, 0.1).unwrap(), 0.0);
}

#[test]
fn direct_ipp_and_integrated_quadratic_terms_agree() {
    let n = 30;
    let op = GalerkinOperator::from_dipole(&dipole(), n);
    let horizon = 0.3;
    let u = compliant(2e-4, horizon, 30.0);
    let spectrum = Spectrum::new(n);
    let bundle = expansion_terms(&op, &u, &[horizon], &OdeOptions::with_tol(1e-13), 1e-9).unwrap();
    let u1sq = u.integrate(|_, r| r[1] * r[1]);
    for j in [1, 2, 3, 7, 20] {
        let ks = KernelSet::new(&op, j).unwrap();
        let sc = ks.sample(&u);
        let direct = ks.quad_term_direct(&sc);
        let ipp = ks.quad_term_ipp(&sc).unwrap();
        assert!((direct - ipp).norm() < 1e-8 * (1.0 + u1sq), "j={j}: {direct} vs {ipp}");
        let xi = spectrum.mode_amplitude(&bundle.xi_aux[0], j);
        assert!((direct - xi).norm() < 1e-9 * (1.0 + direct.norm()), "j={j}: {direct} vs integrated {xi}");
        let zeta = spectrum.mode_amplitude(&bundle.zeta_aux[0], j);
        let cubic = ks.cubic_term(&sc);
        assert!((cubic - zeta).norm() < 1e-9 * (1.0 + cubic.norm()), "j={j}: {cubic} vs integrated {zeta}");
    }
}

#[test]
fn cubic_term_matches_integration_for_generic_control() {
    let n = 20;
    let op = GalerkinOperator::from_dipole(&dipole(), n);
    let horizon = 0.2;
    let u = plain(3.0, horizon);
    let bundle = expansion_terms(&op, &u, &[horizon], &OdeOptions::with_tol(1e-13), 1e-9).unwrap();
    let spectrum = Spectrum::new(n);
    for j in [1, 2, 4] {
        let q = quad_term_direct(&op, &u, j).unwrap();
        let c = cubic_term_kernels(&op, &u, j).unwrap();
        let xi = spectrum.mode_amplitude(&bundle.xi_aux[0], j);
        let zeta = spectrum.mode_amplitude(&bundle.zeta_aux[0], j);
        assert!((q - xi).norm() < 1e-10 * (1.0 + xi.norm()), "j={j}: {q} vs {xi}");
        assert!((c - zeta).norm() < 1e-10 * (1.0 + zeta.norm()), "j={j}: {c} vs {zeta}");
        assert!(zeta.norm() > 1e-8);
    }
}

#[test]
fn ipp_requires_vanishing_primitives() {
    let op = GalerkinOperator::from_dipole(&dipole(), 10);
    let u = plain(1.0, 0.3);
    assert!(matches!(quad_term_ipp(&op, &u, 2), Err(Error::Contract(_))));
}

#[test]
fn cubic_kernels_at_origin_give_cubic_coefficient() {
    let mu = dipole();
    let n = 30;
    let op = GalerkinOperator::from_dipole(&mu, n);
    for k in [2, 3, 4] {
        let ks = KernelSet::new(&op, k).unwrap();
        let diff = ks.cub1.eval(0.0, 0.0) - ks.cub2.eval(0.0, 0.0);
        let c = ModeColumns::new(&mu, k, n).cubic();
        assert!((diff.re - c).abs() < 1e-9 * (1.0 + c.abs()), "K={k}: {diff} vs {c}");
        assert!(diff.im.abs() < 1e-12);
    }
}

#[test]
fn drift_from_kernel_diagonal_matches_series() {
    let mu = dipole();
    let n = 30;
    let op = GalerkinOperator::from_dipole(&mu, n);
    for k in [2, 3, 5] {
        let ks = KernelSet::new(&op, k).unwrap();
        let cols = ModeColumns::new(&mu, k, n);
        for p in [2, 3] {
            let a = ks.drift(p);
            let b = cols.drift(p);
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "K={k} p={p}: {a} vs {b}");
        }
    }
}

#[test]
fn kernels_are_bounded_and_stable_under_truncation() {
    // x⁵(1-x)⁵ meets the boundary conditions, so the series tail decays algebraically
    let mu = DipoleMoment::new(
        (0..=5)
            .map(|k| Atom::PolyBump {
                power: 5 + k,
                center: 0.0,
                half_width: 10.0,
                amplitude: 1e3 * crate::bump::binomial(5, k as usize) * if k % 2 == 0 { 1.0 } else { -1.0 },
                kappa: 0.0,
            })
            .collect(),
    );
    let pts = [(0.0, 0.0), (0.03, 0.01), (0.2, 0.11)];
    let eval = |n: usize| -> Vec<Complex64> {
        let op = GalerkinOperator::from_dipole(&mu, n);
        // mode 3: the dipole is symmetric about 1/2, so even modes do not couple to the ground state
        let ks = KernelSet::new(&op, 3).unwrap();
        pts.iter().map(|&(t, s)| ks.quad.eval(t, s)).collect()
    };
    let (k10, k20, k40) = (eval(10), eval(20), eval(40));
    for i in 0..pts.len() {
        let d1 = (k20[i] - k10[i]).norm();
        let d2 = (k40[i] - k20[i]).norm();
        assert!(d2 <= d1 / 8.0 + 1e-12, "point {i}: {d1} then {d2}");
        assert!(k40[i].norm() < 1e3);
    }
}

#[test]
fn kernel_derivatives_match_finite_differences() {
    let op = GalerkinOperator::from_dipole(&dipole(), 8);
    let ks = KernelSet::new(&op, 3).unwrap();
    let (t, s, h) = (0.013, 0.007, 1e-6);
    let d1 = (ks.quad.eval(t + h, s) - ks.quad.eval(t - h, s)) / (2.0 * h);
    assert!((d1 - ks.quad.deriv(t, s, 1, 0)).norm() < 1e-5 * (1.0 + d1.norm()));
    let d2 = (ks.quad.deriv(t, s + h, 1, 1) - ks.quad.deriv(t, s - h, 1, 1)) / (2.0 * h);
    assert!((d2 - ks.quad.deriv(t, s, 1, 2)).norm() < 1e-5 * (1.0 + d2.norm()));
}

#[test]
fn heuristic_parity() {
    let u = plain(0.7, 0.4);
    let h = heuristic_leading(&u, 2.0, 3.0);
    let hm = heuristic_leading(&u.scaled(-1.0), 2.0, 3.0);
    assert!((h.cubic + hm.cubic).norm() < 1e-15);
    assert!((h.quadratic - hm.quadratic).norm() < 1e-15);
}

#[test]
fn non_overlap_requires_boundary_conditions() {
    let u = plain(1.0, 0.3).concatenate(&ControlSignal::zero(0.2));
    assert!(matches!(non_overlap_delta(&u, 0.3), Err(Error::Contract(_))));
    let v = compliant(1.0, 0.3, 5.0).concatenate(&compliant(0.5, 0.2, 3.0));
    let bound = non_overlap_delta(&v, 0.3).unwrap();
    assert!(bound > 0.0 && bound.is_finite());
}

#[test]
fn matrix_kernels_include_third_commutator() {
    let h0 = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 3.0, 0.1, 0.0, 0.1, 6.0]);
    let h1 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 1.0, 0.3, 0.7, 0.5, 0.7, -0.2]);
    let op = GalerkinOperator::from_matrices(&h0, &h1).unwrap();
    let horizon = 1.0;
    let u = plain(2.0, horizon);
    let bundle = expansion_terms(&op, &u, &[horizon], &OdeOptions::with_tol(1e-13), 1e-9).unwrap();
    for j in 1..=3 {
        let c = cubic_term_kernels(&op, &u, j).unwrap();
        let a = bundle.zeta_aux[0].coefficients[j - 1] * Complex64::from_polar(1.0, op.lambda[j - 1] * horizon);
        assert!((c - a).norm() < 1e-10 * (1.0 + a.norm()), "j={j}: {c} vs {a}");
    }
}
