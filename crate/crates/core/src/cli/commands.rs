use super::{Command, FamilyName, RunConfig};
use crate::bump::Bump;
use crate::correction::CorrectionConfig;
use crate::dipole::{
    check_hypotheses, cubic_coefficient, drift_coefficient_bracket, drift_coefficient_series, DipoleMoment, Tolerances,
};
use crate::driver::{
    brouwer_targeting, default_tv2_window, perturbed_target, reachable_vector_i_phik, reachable_vector_phik,
    toy_experiments, BrouwerConfig, BrouwerStatus, RunOutcome, ToyConfig, Tv1Config, Tv2Config, VectorVariation,
    RESIDUAL_EXPONENT,
};
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::ode::OdeOptions;
use crate::signals::{
    loglog_fit, measure, scaling_law_fit, ControlSignal, NormSpec, OscillatingFamily, Provenance, Term, Trig,
};
use crate::simulate::{
    expansion_terms, simulate, simulate_auxiliary, simulate_toy, GalerkinOperator, RunManifest, ToyModel,
};
use crate::spectral::Spectrum;
use crate::synthesis::{synthesize, SynthesisConfig};
use num_complex::Complex64 as C;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;

pub(super) const SCHEMA_VERSION: u32 = 1;

/// Runs one subcommand; `Ok(false)` means the run completed but missed its checks.
pub(super) fn run(cmd: &Command, cfg: &RunConfig) -> Result<bool> {
    let out = cfg.output_dir.as_path();
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    match cmd {
        Command::SynthesizeMu => synthesize_mu(cfg, out),
        Command::CheckHypotheses => hypotheses(cfg, out),
        Command::Simulate { .. } => simulate_cmd(cfg, out),
        Command::VerifyExpansion { .. } => expansion(cfg, out),
        Command::VerifyDrift => drift(cfg, out),
        Command::VerifyCubicRecovery { .. } => tv1(cfg, out),
        Command::VerifyPhiK { .. } => tv2(cfg, out),
        Command::Target { .. } => target(cfg, out),
        Command::ToyModels { .. } => toys(cfg, out),
        Command::ScalingLaws { .. } => scaling(cfg, out),
    }
}

/// Writes `{"schema": "stlc.<kind>", "schema_version": 1, ...}`.
fn write_report<T: Serialize>(dir: &Path, file: &str, kind: &str, data: &T) -> Result<()> {
    let mut v = serde_json::to_value(data)?;
    let obj = match v.as_object_mut() {
        Some(o) => o,
        None => return Err(Error::Contract(format!("report {kind} is not a JSON object"))),
    };
    obj.insert("schema".into(), Value::String(format!("stlc.{kind}")));
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    std::fs::write(dir.join(file), serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

fn ode(cfg: &RunConfig) -> OdeOptions {
    OdeOptions::with_tol(cfg.ode_tol)
}

fn load_mu(cfg: &RunConfig) -> Result<DipoleMoment> {
    match &cfg.mu {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            DipoleMoment::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        None => Ok(synthesize(&synthesis_config(cfg))?.mu),
    }
}

fn synthesis_config(cfg: &RunConfig) -> SynthesisConfig {
    SynthesisConfig {
        modes: cfg.modes,
        ..SynthesisConfig::new(cfg.k, cfg.seed)
    }
}

fn operator(cfg: &RunConfig) -> Result<GalerkinOperator> {
    Ok(GalerkinOperator::from_dipole(&load_mu(cfg)?, cfg.modes))
}

/// `α·bump(t)·(cos ωt + 0.4 sin ωt)` on [0.05T, 0.95T]; `order` extra derivatives make the
/// first `order` primitives vanish at T.
pub(crate) fn pulse(alpha: f64, horizon: f64, omega: f64, order: usize) -> ControlSignal {
    let term = Term {
        envelope: Bump::on_interval(0.05 * horizon, 0.95 * horizon, 1.0, 1.0),
        t_ref: 0.0,
        order,
        amplitude: alpha,
        trig: vec![Trig { omega, a: 1.0, b: 0.4 }],
    };
    ControlSignal::from_terms(horizon, vec![term], Provenance::Analytic)
}

fn synthesize_mu(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let res = synthesize(&synthesis_config(cfg))?;
    std::fs::write(out.join("mu.json"), res.mu.to_json())?;
    write_report(out, "hypotheses.json", "hypotheses", &res.report)?;
    write_report(
        out,
        "synthesis.json",
        "synthesis",
        &json!({ "seed": res.seed, "geometry": res.geometry, "trace": res.trace }),
    )?;
    let r = &res.report;
    println!(
        "mu: K = {}, A = {:?}, C = {:e}, verdict {}",
        r.k,
        r.a_coeffs,
        r.c_k,
        r.verdicts.all()
    );
    Ok(r.verdicts.all())
}

fn hypotheses(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let mu = load_mu(cfg)?;
    let r = check_hypotheses(&mu, cfg.k, cfg.modes, Tolerances::default());
    write_report(out, "hypotheses.json", "hypotheses", &r)?;
    println!("A = {:?}, C = {:e}, verdict {}", r.a_coeffs, r.c_k, r.verdicts.all());
    // the report is the result; a negative verdict is not a failed run
    Ok(true)
}

fn simulate_cmd(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let op = operator(cfg)?;
    let s = &cfg.simulate;
    let u = match &s.control {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ControlSignal>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => pulse(s.amplitude, s.horizon, s.omega, 0),
    };
    let times: Vec<f64> = (1..=s.outputs).map(|i| u.horizon * i as f64 / s.outputs as f64).collect();
    let ground = Spectrum::new(cfg.modes).eigenstate(1, 0.0);
    let opts = ode(cfg);
    let tr = simulate(&op, &u, &ground, &times, &opts)?;
    std::fs::write(out.join("trajectory.csv"), tr.to_csv())?;
    std::fs::write(out.join("control.csv"), u.to_csv(1000))?;
    let mut report = json!({
        "manifest": RunManifest::new(&op, &u, &opts, times.len()),
        "norm_drift": tr.norm_drift,
    });
    if s.auxiliary {
        let aux = simulate_auxiliary(&op, &u, &ground, &times, &opts, f64::INFINITY)?;
        std::fs::write(out.join("auxiliary.csv"), aux.trajectory.to_csv())?;
        report["auxiliary_norm_drift"] = json!(aux.trajectory.norm_drift);
        report["gauge_mismatch"] = json!(aux.gauge_mismatch);
    }
    write_report(out, "simulate.json", "simulate", &report)?;
    println!("norm drift {:e}", tr.norm_drift);
    Ok(true)
}

fn expansion(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let op = operator(cfg)?;
    let e = &cfg.expansion;
    // the fourth-order remainder must stay above the integrator floor
    let opts = OdeOptions::with_tol(cfg.ode_tol.min(1e-13));
    let n = cfg.modes;
    let ground = Spectrum::new(n).eigenstate(1, 0.0);
    let free = Spectrum::new(n).eigenstate(1, e.horizon);
    let mut rows = Vec::new();
    let mut csv = String::from("alpha,r2,r4,aux_r2,aux_r4\n");
    for &alpha in &e.amplitudes {
        let u = pulse(alpha, e.horizon, e.omega, 0);
        let psi = simulate(&op, &u, &ground, &[e.horizon], &opts)?.states.remove(0);
        let aux = simulate_auxiliary(&op, &u, &ground, &[e.horizon], &opts, f64::INFINITY)?
            .trajectory
            .states
            .remove(0);
        let b = expansion_terms(&op, &u, &[e.horizon], &opts, f64::INFINITY)?;
        let d1 = psi.sub(&free).sub(&b.psi[0]);
        let d3 = d1.sub(&b.xi[0]).sub(&b.zeta[0]);
        let a1 = aux.sub(&free).sub(&b.psi_aux[0]);
        let a3 = a1.sub(&b.xi_aux[0]).sub(&b.zeta_aux[0]);
        let r = [d1.l2_norm(), d3.l2_norm(), a1.l2_norm(), a3.l2_norm()];
        csv.push_str(&format!("{alpha:e},{:e},{:e},{:e},{:e}\n", r[0], r[1], r[2], r[3]));
        rows.push((alpha, r));
    }
    std::fs::write(out.join("expansion.csv"), csv)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let fit = |i: usize| loglog_fit(&xs, &rows.iter().map(|r| r.1[i]).collect::<Vec<_>>());
    let (s2, s4, a2, a4) = (fit(0)?, fit(1)?, fit(2)?, fit(3)?);
    let pass = s2.slope >= 1.95 && s4.slope >= 3.90;
    write_report(
        out,
        "expansion.json",
        "expansion",
        &json!({
            "second_order": s2, "fourth_order": s4,
            "auxiliary_second_order": a2, "auxiliary_fourth_order": a4,
            "thresholds": [1.95, 3.90], "pass": pass,
        }),
    )?;
    println!("remainder slopes {:.4} and {:.4}", s2.slope, s4.slope);
    Ok(pass)
}

/// Controls for the three evaluations of the quadratic term: (α, T, ω).
const ORACLE_CONTROLS: [(f64, f64, f64); 10] = [
    (2e-4, 0.3, 30.0),
    (1e-3, 0.3, 30.0),
    (5e-4, 0.2, 10.0),
    (2e-3, 0.4, 60.0),
    (1e-4, 0.5, 5.0),
    (3e-3, 0.25, 100.0),
    (4e-4, 0.1, 20.0),
    (8e-4, 0.45, 45.0),
    (1.5e-3, 0.35, 75.0),
    (2.5e-3, 0.5, 3.0),
];

fn drift(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let mu = load_mu(cfg)?;
    let (k, n) = (cfg.k, cfg.modes);
    let series: Vec<_> = (1..=3).map(|p| drift_coefficient_series(&mu, k, p, n)).collect::<Result<_>>()?;
    let bracket = drift_coefficient_bracket(&mu, k);
    let cubic = cubic_coefficient(&mu, k, n);
    let a1_gap = (series[0].value - bracket).abs();
    // tails |A(2N) - A(N)| are reported alongside; the check itself is absolute
    let dual_ok = a1_gap < 1e-6 && cubic.discrepancy < 1e-6;

    let op = GalerkinOperator::from_dipole(&mu, n);
    let ks = KernelSet::new(&op, k)?;
    let spectrum = Spectrum::new(n);
    let opts = OdeOptions::with_tol(cfg.ode_tol.min(1e-13));
    let mut csv = String::from("alpha,horizon,omega,u1_l2_squared,re_direct,im_direct,re_ipp,im_ipp,re_xi,im_xi,scaled_gap\n");
    let mut worst = 0.0f64;
    for (alpha, horizon, omega) in ORACLE_CONTROLS {
        let u = pulse(alpha, horizon, omega, 3);
        let sc = ks.sample(&u);
        let direct = ks.quad_term_direct(&sc);
        let ipp = ks.quad_term_ipp(&sc)?;
        let bundle = expansion_terms(&op, &u, &[horizon], &opts, f64::INFINITY)?;
        let xi = spectrum.mode_amplitude(&bundle.xi_aux[0], k);
        let u1sq = u.integrate(|_, r| r[1] * r[1]);
        let gap = (direct - ipp).norm().max((direct - xi).norm()).max((ipp - xi).norm()) / (1.0 + u1sq);
        worst = worst.max(gap);
        csv.push_str(&format!(
            "{alpha:e},{horizon:e},{omega:e},{u1sq:e},{:e},{:e},{:e},{:e},{:e},{:e},{gap:e}\n",
            direct.re, direct.im, ipp.re, ipp.im, xi.re, xi.im
        ));
    }
    std::fs::write(out.join("drift_oracles.csv"), csv)?;
    let pass = dual_ok && worst < 1e-8;
    write_report(
        out,
        "drift.json",
        "drift",
        &json!({
            "k": k, "modes": n,
            "a_series": series, "a1_bracket": bracket, "a1_gap": a1_gap,
            "cubic": cubic,
            "oracle_max_scaled_gap": worst,
            "pass": pass,
        }),
    )?;
    println!(
        "A1 gap {a1_gap:e} (tail {:e}), C gap {:e} (tail {:e}), quadratic-term gap {worst:e}",
        series[0].tail_estimate, cubic.discrepancy, cubic.tail_estimate
    );
    Ok(pass)
}

fn correction(cfg: &RunConfig) -> CorrectionConfig {
    CorrectionConfig {
        ode: ode(cfg),
        ..CorrectionConfig::default()
    }
}

fn write_variation(out: &Path, stem: &str, v: &VectorVariation) -> Result<()> {
    std::fs::write(out.join(format!("{stem}_sweep.csv")), v.to_csv())?;
    write_report(out, &format!("{stem}.json"), stem, v)
}

fn tv1(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let op = operator(cfg)?;
    let c = Tv1Config {
        horizon: cfg.tv1.horizon,
        t1: cfg.tv1.t1,
        support: cfg.tv1.support,
        bs: cfg.sweep.values(),
        correction: correction(cfg),
        ..Tv1Config::new(cfg.k)
    };
    let v = reachable_vector_i_phik(&op, &c)?;
    write_variation(out, "tv1", &v)?;
    let slope = v.residual_fit.map_or(f64::NAN, |f| f.slope);
    let pass = v.points.iter().all(|p| p.valid) && slope >= RESIDUAL_EXPONENT - 0.05 && v.projected_max < 1e-8;
    println!("TV1 residual slope {slope:.4}, max projected residual {:e}", v.projected_max);
    Ok(pass)
}

fn tv2(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let op = operator(cfg)?;
    let c = Tv2Config {
        window: cfg.tv2.window,
        pulse_fraction: cfg.tv2.pulse_fraction,
        support: cfg.tv2.support,
        bs: cfg.sweep.values(),
        correction: correction(cfg),
        ..Tv2Config::new(cfg.k)
    };
    let v = reachable_vector_phik(&op, &c)?;
    write_variation(out, "tv2", &v)?;
    let slope = v.residual_fit.map_or(f64::NAN, |f| f.slope);
    println!("TV2 residual slope {slope:.4}");
    Ok(slope >= RESIDUAL_EXPONENT - 0.05)
}

fn target(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let op = operator(cfg)?;
    let g = &cfg.target;
    let c = BrouwerConfig {
        window: cfg.tv2.window,
        pulse_fraction: cfg.tv2.pulse_fraction,
        support: cfg.tv2.support,
        max_iterations: g.max_iterations,
        radius: g.radius,
        tolerance: g.tolerance,
        correction: correction(cfg),
        ..BrouwerConfig::new(cfg.k)
    };
    let window = cfg.tv2.window.unwrap_or_else(|| default_tv2_window(&op, cfg.k));
    let x_f = perturbed_target(&op, cfg.k, C::new(g.eps_re, g.eps_im), 3.0 * window);
    let res = brouwer_targeting(&op, &x_f, &c)?;
    std::fs::write(out.join("brouwer_trace.csv"), res.trace_csv())?;
    if let Some(u) = &res.control {
        std::fs::write(out.join("control.json"), serde_json::to_string(u)?)?;
    }
    write_report(
        out,
        "brouwer.json",
        "brouwer",
        &json!({
            "status": res.status, "horizon": res.horizon, "target_k": res.target_k,
            "iterations": res.iterations(), "final_error": res.final_error, "trace": res.trace,
        }),
    )?;
    println!("{:?} after {} iterations, error {:e}", res.status, res.iterations(), res.final_error);
    Ok(res.status == BrouwerStatus::Converged)
}

fn toys(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let tc = ToyConfig {
        seed: cfg.seed,
        samples: cfg.toys.samples,
        bs: cfg.sweep.values(),
        ode: ode(cfg),
        bilinear: cfg.toys.bilinear,
        bilinear_bs: cfg.toys.bilinear_sweep.values(),
        ..ToyConfig::default()
    };
    let r = toy_experiments(&tc)?;
    // u ≡ 1 on [0, 1]: x4(1) = 1/252 + 1/10
    let unit = simulate_toy(ToyModel::Tm3, &ControlSignal::constant(1.0, 1.0), &ode(cfg))?;
    let mut csv = String::from("b,residual\n");
    for (b, res) in r.sussmann.bs.iter().zip(&r.sussmann.residuals) {
        csv.push_str(&format!("{b:e},{res:e}\n"));
    }
    std::fs::write(out.join("sussmann.csv"), csv)?;
    let mut csv = String::from("b,goal_residual,e5_residual\n");
    for ((b, g), e) in r.tm3.bs.iter().zip(&r.tm3.goal_residuals).zip(&r.tm3.e5_residuals) {
        csv.push_str(&format!("{b:e},{g:e},{e:e}\n"));
    }
    std::fs::write(out.join("tm3.csv"), csv)?;
    if let Some(bl) = &r.bilinear {
        for (stem, run) in [("bilinear_tv1", &bl.tv1), ("bilinear_tv2", &bl.tv2)] {
            if let RunOutcome::Completed(v) = run {
                std::fs::write(out.join(format!("{stem}_sweep.csv")), v.to_csv())?;
            }
        }
    }
    let pass = r.tm3.closed_form_gap < 1e-8
        && unit.closed_form_gap < 1e-8
        && r.sussmann.min_margin >= 0.0
        && r.sussmann.residual_fit.slope >= 12.0 / 11.0 - 0.03;
    write_report(out, "toys.json", "toys", &json!({ "report": r, "tm3_unit_control": unit, "pass": pass }))?;
    println!(
        "TM3 x4(1) = {:.7} for u = 1, Sussmann slope {:.4}",
        unit.state[3], r.sussmann.residual_fit.slope
    );
    Ok(pass)
}

fn scaling(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let s = &cfg.scaling;
    let family = match s.family {
        FamilyName::Pde => OscillatingFamily::pde(s.c_k, s.support),
        FamilyName::Toy => OscillatingFamily::toy().with_support(s.support),
        FamilyName::Sussmann => OscillatingFamily::sussmann().with_support(s.support),
    };
    let p = if s.p >= 1e300 { f64::INFINITY } else { s.p };
    let spec = NormSpec { k: s.k, p };
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let expected = family.amplitude_exponent + family.time_exponent * (inv_p - s.k as f64);
    let bs = s.sweep.values();
    let fit = scaling_law_fit(|b| family.control(b, s.horizon), spec, &bs)?;
    let mut csv = String::from("b,norm\n");
    for &b in &bs {
        csv.push_str(&format!("{b:e},{:e}\n", measure(&family.control(b, s.horizon)?, spec)));
    }
    std::fs::write(out.join("scaling.csv"), csv)?;
    let relative_gap = (fit.slope - expected).abs() / expected.abs();
    let pass = relative_gap <= 0.02;
    write_report(
        out,
        "scaling.json",
        "scaling",
        &json!({
            "family": s.family, "k": s.k, "p": if p.is_infinite() { json!("inf") } else { json!(p) },
            "fit": fit, "expected": expected, "relative_gap": relative_gap, "pass": pass,
        }),
    )?;
    println!("slope {:.6}, expected {expected:.6}", fit.slope);
    Ok(pass)
}
