use super::*;
use crate::dipole::{Atom, DipoleMoment, ModeColumns};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn pde_op(n: usize) -> GalerkinOperator {
    let mu = DipoleMoment::new(vec![Atom::bump(0.4, 0.3, 1.0), Atom::bump(0.7, 0.2, -0.5)]);
    GalerkinOperator::from_dipole(&mu, n)
}

fn toy() -> (BilinearToy, GalerkinOperator) {
    let sys = bilinear_toy_system(2, 7).unwrap();
    let op = sys.operator().unwrap();
    (sys, op)
}

#[test]
fn ground_state_has_unit_interaction_coordinates() {
    let op = pde_op(6);
    let a = interaction(&op, &ground_state(&op, 0.37));
    assert_eq!(a[0], C::new(1.0, 0.0));
    assert!(a[1..].iter().all(|z| *z == C::new(0.0, 0.0)));
}

#[test]
fn effective_cubic_is_the_truncated_series() {
    let mu = DipoleMoment::new(vec![Atom::bump(0.35, 0.25, 1.0), Atom::bump(0.75, 0.15, 0.7)]);
    for k in [2, 3] {
        let op = GalerkinOperator::from_dipole(&mu, 14);
        let series = ModeColumns::new(&mu, k, 14).cubic();
        let got = effective_cubic(&op, k).unwrap();
        assert!((got - series).abs() <= 1e-9 * series.abs().max(1.0), "K = {k}: {got} vs {series}");
    }
}

#[test]
fn zero_amplitude_gives_the_free_ground_motion() {
    let op = pde_op(8);
    let mut c = Tv1Config::new(3);
    c.bs = vec![0.0];
    c.min_points = 0;
    let v = reachable_vector_i_phik(&op, &c).unwrap();
    let p = &v.points[0];
    assert!(p.valid, "{:?}", p.flag);
    assert_eq!(p.residual, 0.0);
    assert_eq!(p.norm(2), Some(0.0));
    let mut c = Tv2Config::new(3);
    c.bs = vec![0.0];
    c.min_points = 0;
    let v = reachable_vector_phik(&op, &c).unwrap();
    assert_eq!(v.points[0].residual, 0.0);
    assert_eq!(pulse_amplitudes(C::new(0.0, 0.0), 3.0, 0.1).unwrap(), (0.0, 0.0));
}

#[test]
fn tv2_window_outside_the_admissible_range_is_a_config_error() {
    let op = pde_op(8);
    let w = op.lambda[1] - op.lambda[0];
    let mut c = Tv2Config::new(2);
    c.window = Some(std::f64::consts::PI / (2.0 * w));
    assert!(matches!(reachable_vector_phik(&op, &c), Err(Error::Config(_))));
    c.window = Some(-0.1);
    assert!(matches!(reachable_vector_phik(&op, &c), Err(Error::Config(_))));
    assert!(default_tv2_window(&op, 2) < std::f64::consts::PI / (2.0 * w));
}

#[test]
fn idle_segment_rotates_the_lost_coefficient_by_the_gap_frequency() {
    let ode = OdeOptions::with_tol(1e-12);
    let op = pde_op(10);
    let c = effective_cubic(&op, 2).unwrap();
    let u = oscillating_control_pde(3e-3, c, 0.02, 0.02).unwrap();
    let gap = shifted_phase_gap(&op, 2, &u, 0.07, &ode).unwrap();
    assert!(gap < 1e-10, "{gap:e}");
    let (_, op) = toy();
    let u = ControlSignal::cosine(0.5, 0.3, 2.0, 0.1);
    assert!(shifted_phase_gap(&op, 2, &u, 0.9, &ode).unwrap() < 1e-10);
}

#[test]
fn bilinear_toy_meets_its_hypotheses() {
    let (sys, op) = toy();
    let (l, m) = (&op.lambda, &op.m);
    let k = 1;
    // drift coefficients from the mode sums, commutator rebuilt from H_0, H_1
    let drift = |p: i32| -> f64 {
        (0..l.len())
            .map(|j| {
                (l[j] - 0.5 * (l[0] + l[k])) * ((l[k] - l[j]) * (l[j] - l[0])).powi(p - 1) * m[(j, 0)] * m[(k, j)]
            })
            .sum()
    };
    let (h0, h1) = (sys.h0(), sys.h1());
    let ad = |a: &DMatrix<f64>| &h1 * a - a * &h1;
    let ad3 = ad(&ad(&ad(&h0)));
    let scale = h1.amax().powi(2) * l[4].powi(3);
    assert!(m[(k, 0)].abs() < 1e-14);
    assert!(drift(1).abs() < 1e-12 * scale && drift(2).abs() < 1e-12 * scale * l[4].powi(2));
    assert!(drift(3).abs() > 1e-2 && (drift(3) - sys.drifts[2]).abs() < 1e-9 * drift(3).abs());
    assert!(ad3[(k, 0)].abs() < 1e-12 * h1.amax().powi(3) * l[4]);
    assert!(sys.c_eff.abs() > 1e-2);
    for j in [0, 2, 3, 4] {
        assert!(m[(j, 0)].abs() > 0.05);
    }
    // seeded construction is deterministic
    assert_eq!(bilinear_toy_system(2, 7).unwrap().h1, sys.h1);
}


#[test]
fn toy_tv1_recovers_the_lost_direction() {
    let (_, op) = toy();
    let cfg = bilinear_tv1_config(2, &log_sweep(2e-4, 1e-5, 6));
    let v = reachable_vector_i_phik(&op, &cfg).unwrap();
    let fit = v.residual_fit.unwrap();
    assert!(fit.slope >= RESIDUAL_EXPONENT - 0.05, "{}", v.to_csv());
    assert!(v.projected_max < 1e-8);
    let size = v.size_fit.unwrap().slope;
    assert!((size - SIZE_EXPONENT).abs() < 0.01, "{size}");
    assert!(v.motion_spread < 2.0, "{}", v.motion_spread);
    let csv = v.to_csv();
    let cols = csv.lines().next().unwrap().split(',').count();
    assert!(csv.lines().all(|l| l.split(',').count() == cols));
}

#[test]
fn targeting_the_ground_state_needs_no_control() {
    let op = pde_op(8);
    let cfg = BrouwerConfig::new(2);
    let t = 3.0 * default_tv2_window(&op, 2);
    let out = brouwer_targeting(&op, &ground_state(&op, t), &cfg).unwrap();
    assert_eq!(out.status, BrouwerStatus::Converged);
    assert_eq!(out.iterations(), 1);
    assert_eq!(out.final_error, 0.0);
    assert_eq!(out.control.unwrap().sobolev_norm(2), 0.0);
}

#[test]
fn targeting_rejects_a_mismatched_time_and_reports_divergence() {
    let op = pde_op(8);
    let mut cfg = BrouwerConfig::new(2);
    let t = 3.0 * default_tv2_window(&op, 2);
    assert!(matches!(brouwer_targeting(&op, &ground_state(&op, 0.5 * t), &cfg), Err(Error::Config(_))));
    cfg.radius = 1e-6;
    let x_f = perturbed_target(&op, 2, C::new(0.0, 1e-4), t);
    let out = brouwer_targeting(&op, &x_f, &cfg).unwrap();
    assert_eq!(out.status, BrouwerStatus::Diverged);
    assert!(out.trace.is_empty());
}

#[test]
fn toy_models_show_obstruction_competition_and_assembly() {
    let cfg = ToyConfig {
        bilinear: false,
        ..ToyConfig::default()
    };
    let r = toy_experiments(&cfg).unwrap();
    assert!(r.tm1.min_x2 > 0.0);
    assert!(r.sussmann.min_margin >= 0.0 && r.sussmann.max_w1_inf <= 0.5 + 1e-12);
    assert!(r.sussmann.residual_fit.slope >= 12.0 / 11.0 - 0.03, "{:?}", r.sussmann.residual_fit);
    assert!(r.tm3.closed_form_gap < 1e-8);
    assert!(r.tm3.goal_fit.slope >= 1.0 + 1.0 / 41.0 - 0.03, "{:?}", r.tm3.goal_fit);
    assert!(r.tm3.e5_fit.slope >= 1.0 + 1.0 / 41.0 - 0.03, "{:?}", r.tm3.e5_fit);
}

#[test]
fn tm3_assembly_moves_along_e4_plus_t_e5() {
    // the oscillating windows are exact: x_1..x_3 return to zero at the end
    let (x, gap) = tm3_assembly(1e-4, 2e-4, 1.0, &OdeOptions::with_tol(1e-12)).unwrap();
    assert!(gap < 1e-10);
    assert!(x[..3].iter().all(|v| v.abs() < 1e-10), "{x:?}");
    assert!((x[3] - 3e-4).abs() < 0.05 * 3e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pulse_amplitudes_realize_the_requested_coefficient(
        re in -1e-2f64..1e-2, im in -1e-2f64..1e-2, omega in 1.0f64..100.0, frac in 0.05f64..0.95,
    ) {
        let window = frac * std::f64::consts::PI / (2.0 * omega);
        let z = C::new(re, im);
        let (a, b) = pulse_amplitudes(z, omega, window).unwrap();
        let got = I * a + I * b * C::from_polar(1.0, 2.0 * omega * window);
        prop_assert!((got - z).norm() < 1e-12 * (1.0 + z.norm() / (2.0 * omega * window).sin().abs()));
    }

    #[test]
    fn perturbed_targets_are_unit_states(re in -1e-3f64..1e-3, im in -1e-3f64..1e-3, t in 0.0f64..1.0) {
        let op = pde_op(6);
        let x = perturbed_target(&op, 3, C::new(re, im), t);
        prop_assert!((x.l2_norm() - 1.0).abs() < 1e-14);
        let a = interaction(&op, &x);
        let n = (1.0 + re * re + im * im).sqrt();
        prop_assert!((a[2] - C::new(re, im) / n).norm() < 1e-15);
    }

    #[test]
    fn log_sweeps_hit_both_ends(hi in 1e-3f64..1.0, ratio in 2.0f64..1e4, n in 2usize..12) {
        let lo = hi / ratio;
        let s = log_sweep(hi, lo, n);
        prop_assert_eq!(s.len(), n);
        prop_assert!((s[0] / hi - 1.0).abs() < 1e-12 && (s[n - 1] / lo - 1.0).abs() < 1e-12);
        prop_assert!(s.windows(2).all(|w| w[1] < w[0]));
    }
}
