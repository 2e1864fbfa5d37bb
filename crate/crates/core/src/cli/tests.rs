use super::*;
use proptest::prelude::*;

fn parse(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("stlc").chain(args.iter().copied())).unwrap()
}

#[test]
fn defaults_validate() {
    RunConfig::default().validate().unwrap();
}

#[test]
fn flags_win_over_the_config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "seed = 3\nmodes = 12\noutput_dir = \"from-file\"\n[tv1]\nsupport = 0.1\n").unwrap();
    let p = path.to_str().unwrap();
    let cli = parse(&["--config", p, "--seed", "11", "verify-cubic-recovery", "--support", "0.2"]);
    let cfg = resolve(&cli, Some("from-env".into())).unwrap();
    assert_eq!((cfg.seed, cfg.modes, cfg.tv1.support), (11, 12, 0.2));
    assert_eq!(cfg.output_dir, PathBuf::from("from-env"));
    assert_eq!(cfg.command.as_deref(), Some("verify-cubic-recovery"));
    let cli = parse(&["--config", p, "--output-dir", "from-flag", "toy-models"]);
    assert_eq!(resolve(&cli, Some("from-env".into())).unwrap().output_dir, PathBuf::from("from-flag"));
    let cli = parse(&["--config", p, "toy-models"]);
    assert_eq!(resolve(&cli, None).unwrap().output_dir, PathBuf::from("from-file"));
}

#[test]
fn scaling_flags_use_their_own_grid() {
    let cli = parse(&["scaling-laws", "--family", "sussmann", "--k", "-3", "--p", "inf", "--points", "9"]);
    let cfg = resolve(&cli, None).unwrap();
    assert_eq!(cfg.scaling.family, FamilyName::Sussmann);
    assert_eq!(cfg.scaling.k, -3);
    assert!(cfg.scaling.p.is_infinite());
    assert_eq!(cfg.scaling.sweep.points, 9);
    assert_eq!(cfg.sweep, Sweep::default());
}

#[test]
fn invalid_combinations_are_config_errors() {
    for args in [
        &["--K", "1", "verify-drift"][..],
        &["--modes", "4", "--K", "5", "verify-drift"],
        &["--b-max", "1e-6", "--b-min", "1e-3", "verify-phiK"],
        &["verify-cubic-recovery", "--t1", "0.6"],
        &["verify-phiK", "--pulse-fraction", "1.5"],
        &["target", "--eps-re", "1.0"],
        &["scaling-laws", "--b-min", "1e-4"],
        &["--mu", "/nonexistent/mu.json", "check-hypotheses"],
        &["--tol", "0.1", "simulate"],
    ] {
        let err = resolve(&parse(args), None).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{args:?}: {err}");
        assert_eq!(exit_code(&err), EXIT_CONFIG);
    }
    let err = RunConfig::from_toml("modes = 30\nunknown = 1\n").unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let err = RunConfig::from_toml("version = 2\n").unwrap().validate().unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn usage_errors_exit_with_code_two() {
    assert_eq!(main_with_args(["stlc", "no-such-command"]), EXIT_CONFIG);
    assert_eq!(main_with_args(["stlc", "scaling-laws", "--family", "nope"]), EXIT_CONFIG);
}

#[test]
fn resolved_config_round_trips_through_toml() {
    let cli = parse(&["--seed", "5", "--mu", "Cargo.toml", "target", "--eps-im", "-2e-4", "--window", "0.01"]);
    let cfg = resolve(&cli, None).unwrap();
    let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_valid_config_round_trips(
        modes in 2usize..64, seed in any::<u64>(), tol in 1e-14f64..1e-4,
        b_min in 1e-9f64..1e-4, decades in 0.5f64..6.0, points in 2usize..20,
        k in -4i32..4, p in 1.0f64..8.0, horizon in 0.05f64..2.0,
    ) {
        let mut cfg = RunConfig { modes, k: 2, seed, ode_tol: tol, ..RunConfig::default() };
        cfg.sweep = Sweep { b_max: b_min * 10f64.powf(decades), b_min, points };
        cfg.scaling.k = k;
        cfg.scaling.p = if k == 0 { f64::INFINITY } else { p };
        cfg.tv1.horizon = horizon;
        cfg.tv1.t1 = 0.5 * horizon;
        cfg.tv2.window = Some(horizon / 10.0);
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }
}
