use super::*;
use crate::dipole::drift_coefficient_bracket;
use proptest::prelude::*;

#[test]
fn geometry_for_small_k_is_valid() {
    for k in 2..=5 {
        let g = SynthesisGeometry::new(k).unwrap();
        assert!(g.eta > 0.0 && g.eta <= 1.0 / k as f64);
        assert!(eigenfunction_value(k, g.x_bar).abs() < 1e-12);
        for p in [g.j, g.j_hat, g.i, g.j_tilde] {
            assert!(phi_product(k, 0.5 * (p[0].0 + p[0].1)) > 0.0);
            assert!(phi_product(k, 0.5 * (p[1].0 + p[1].1)) < 0.0);
        }
    }
    assert!(SynthesisGeometry::new(1).is_err());
    assert!(SynthesisGeometry::with_delta(2, 0.9).is_err());
}

#[test]
fn oscillating_bump_first_drift_tends_to_lambda() {
    // the continuum first drift of the order-1 bump approaches λ as the width shrinks
    let g = SynthesisGeometry::new(2).unwrap();
    for lam in [0.3, -0.3] {
        let mu = build_oscillating_bump(&g, 1e-3, lam, 1).unwrap();
        let a = drift_coefficient_bracket(&mu, 2);
        assert!((a - lam).abs() < 0.05 * lam.abs(), "λ = {lam}: {a}");
    }
}

#[test]
fn oscillating_bump_amplitude_scales_with_sqrt_lambda() {
    let g = SynthesisGeometry::new(2).unwrap();
    for order in [1, 2] {
        let amp = |lam: f64| match oscillating_atom(&g, 0.02, lam, order).unwrap() {
            Atom::Bump { amplitude, .. } => amplitude,
            _ => unreachable!(),
        };
        assert!((amp(1.2) / amp(0.3) - 2.0).abs() < 1e-12);
    }
    assert!(oscillating_atom(&g, 1.0, 1.0, 1).is_err());
    assert!(oscillating_atom(&g, 0.01, 0.0, 1).is_err());
    assert!(oscillating_atom(&g, 0.01, 1.0, 3).is_err());
}

#[test]
fn lambda_solver_on_known_roots() {
    let (x, r) = solve_lambda(|l| 2.0 * l - 3.0, (0.0, 5.0)).unwrap();
    assert!((x - 1.5).abs() < 1e-12 && r.abs() < 1e-12);
    let e = 0.37;
    let (x, _) = solve_lambda(|l| l - 1.0 + e * l, (0.0, 2.0)).unwrap();
    assert!((x - 1.0 / (1.0 + e)).abs() < 1e-12);
    assert!(matches!(solve_lambda(|l| l * l + 1.0, (-1.0, 1.0)), Err(Error::Bracket { .. })));
}

#[test]
fn reference_has_no_overlap_and_nonzero_first_drift() {
    for seed in [1, 2] {
        let s = step1_reference(&SynthesisConfig::new(2, seed)).unwrap();
        let f = s.functionals();
        assert!(f[0].abs() < 1e-12, "{f:?}");
        assert!(f[1].abs() > 1e-6);
        // reference atoms live on [0, η/2]
        for a in &s.mu_ref().atoms {
            let (_, r) = a.support().unwrap();
            assert!(r <= 0.5 * s.geometry.eta + 1e-12);
        }
        // the compensator has unit overlap
        assert!((s.dict.m1[s.mu0][1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn steps_zero_each_drift_in_turn() {
    let cfg = SynthesisConfig::new(2, 2);
    let s2 = step2_kill_a1(step1_reference(&cfg).unwrap()).unwrap();
    let f = s2.functionals();
    assert!(f[0].abs() < 1e-12 && f[1].abs() < 1e-9, "{f:?}");
    let s3 = step3_kill_a2(s2).unwrap();
    let f = s3.functionals();
    assert!(f[..3].iter().all(|v| v.abs() < 1e-9), "{f:?}");
    assert!(step2_kill_a1(s3.clone()).is_err());
    let s4 = step4_set_a3(s3).unwrap();
    assert_eq!(s4.stage, Stage::Done);
    assert_eq!(s4.trace.len(), 4);
}

#[test]
fn synthesized_dipole_passes_every_check() {
    let r = synthesize(&SynthesisConfig::new(2, 7)).unwrap();
    let rep = &r.report;
    assert!(rep.verdicts.all(), "{:?}", rep.verdicts);
    assert!(rep.linear_coeffs[1].abs() < 1e-9);
    assert!(rep.a_coeffs[0].abs() < 1e-9 && rep.a_coeffs[1].abs() < 1e-9);
    assert!(rep.a_coeffs[2].abs() > 1e-6 && rep.c_k.abs() > 1e-6);
    for (j, m) in rep.linear_coeffs.iter().enumerate() {
        if j != 1 {
            assert!(((j + 1) as f64).powi(7) * m.abs() > 1e-6, "mode {}", j + 1);
        }
    }
    // same seed, same dipole
    let again = synthesize(&SynthesisConfig::new(2, 7)).unwrap();
    assert_eq!(r.mu, again.mu);
}

#[test]
fn third_drift_atom_meets_its_constraints() {
    let cfg = SynthesisConfig::new(2, 3);
    let s = step3_kill_a2(step2_kill_a1(step1_reference(&cfg).unwrap()).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (atoms, c) = third_drift_atom(&s, &mut rng, 3).unwrap();
    let mut d = Dictionary::new(2, 30);
    for a in atoms {
        d.push(a);
    }
    let f = d.functionals(&c);
    let scale = c.iter().map(|x| x.abs()).fold(1.0, f64::max);
    assert!(f[..3].iter().all(|v| v.abs() < 1e-12 * scale), "{f:?}");
    assert!((f[3] - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // the truncated functionals of disjoint atoms differ from the sum only through
    // the cross term, which is bilinear: f(a + b) = f(a) + f(b) + 2 B(a, b)
    #[test]
    fn functionals_are_quadratic_forms(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let mut d = Dictionary::new(2, 30);
        d.push(Atom::bump(0.2, 0.05, 1.0));
        d.push(Atom::bump(0.7, 0.08, 1.0));
        let f = |c: [f64; 2]| d.functionals(&c);
        let (fa, fb, fab) = (f([1.0, 0.0]), f([0.0, 1.0]), f([1.0, 1.0]));
        let got = f([x, y]);
        for p in 1..4 {
            let cross = 0.5 * (fab[p] - fa[p] - fb[p]);
            let want = x * x * fa[p] + y * y * fb[p] + 2.0 * x * y * cross;
            prop_assert!((got[p] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
        prop_assert!((got[0] - (x * fa[0] + y * fb[0])).abs() < 1e-14);
    }
}
