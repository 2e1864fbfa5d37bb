use serde_json::Value;
use std::path::Path;
use std::process::Command;

fn stlc(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stlc"))
        .current_dir(dir)
        .env_remove("STLC_OUTPUT_DIR")
        .args(args)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_dipole_has_vanishing_drifts_and_fails_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("zero.json"), r#"{"atoms":[]}"#).unwrap();
    let (code, err) = stlc(dir.path(), &["--mu", "zero.json", "--K", "2", "--output-dir", "out", "check-hypotheses"]);
    assert_eq!(code, 0, "{err}");
    let r = report(&dir.path().join("out/hypotheses.json"));
    assert_eq!(r["schema"], "stlc.hypotheses");
    assert_eq!(r["schema_version"], 1);
    for a in r["a_coeffs"].as_array().unwrap() {
        assert_eq!(a.as_f64(), Some(0.0));
    }
    assert_eq!(r["c_k"].as_f64(), Some(0.0));
    assert_eq!(r["verdicts"]["cubic"], false);
}

#[test]
fn toy_models_report_the_unit_control_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = stlc(dir.path(), &["--output-dir", "out", "toy-models", "--no-bilinear"]);
    assert_eq!(code, 0, "{err}");
    let r = report(&dir.path().join("out/toys.json"));
    // x1 = t, x2 = t²/2, x3 = t³/6, so x4(1) = ∫ t⁶/36 + t⁴/2 = 1/252 + 1/10
    let x4 = r["tm3_unit_control"]["state"][3].as_f64().unwrap();
    assert!((x4 - (1.0 / 252.0 + 0.1)).abs() < 1e-9, "{x4}");
    assert!((x4 - 0.1039683).abs() < 1e-7);
}

#[test]
fn scaling_law_of_the_pde_family_is_one_forty_first() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = stlc(dir.path(), &["--output-dir", "out", "scaling-laws", "--family", "pde", "--k", "2", "--p", "2"]);
    assert_eq!(code, 0, "{err}");
    let r = report(&dir.path().join("out/scaling.json"));
    let slope = r["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 1.0 / 41.0).abs() <= 0.02 / 41.0, "{slope}");
    let csv = std::fs::read_to_string(dir.path().join("out/scaling.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("b,norm"));
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let (code, err) = stlc(dir.path(), &["--seed", "3", "--workers", "2", "--output-dir", out, "toy-models", "--no-bilinear", "--samples", "20"]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["sussmann.csv", "tm3.csv", "toys.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn bad_configuration_exits_with_two_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = stlc(dir.path(), &["--K", "40", "--output-dir", "out", "verify-drift"]);
    assert_eq!(code, 2);
    assert!(err.contains("lost mode"), "{err}");
    assert!(!dir.path().join("out").exists());
    assert_eq!(stlc(dir.path(), &["verify-everything"]).0, 2);
    std::fs::write(dir.path().join("run.toml"), "modes = \"thirty\"\n").unwrap();
    assert_eq!(stlc(dir.path(), &["--config", "run.toml", "toy-models"]).0, 2);
}

#[test]
fn config_file_and_environment_pick_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "output_dir = \"from-file\"\n[scaling]\nfamily = \"sussmann\"\nk = 1\np = inf\n",
    )
    .unwrap();
    let (code, err) = stlc(dir.path(), &["--config", "run.toml", "scaling-laws"]);
    assert_eq!(code, 0, "{err}");
    let r = report(&dir.path().join("from-file/scaling.json"));
    assert_eq!(r["family"], "sussmann");
    assert!((r["expected"].as_f64().unwrap() + 1.0 / 11.0).abs() < 1e-15);
    let out = Command::new(env!("CARGO_BIN_EXE_stlc"))
        .current_dir(dir.path())
        .env("STLC_OUTPUT_DIR", "from-env")
        .args(["--config", "run.toml", "scaling-laws"])
        .status()
        .unwrap();
    assert!(out.success());
    assert!(dir.path().join("from-env/scaling.json").exists());
    // the resolved config is written back and reads as the same run
    let text = std::fs::read_to_string(dir.path().join("from-env/config.toml")).unwrap();
    let back = stlc_core::cli::RunConfig::from_toml(&text).unwrap();
    assert_eq!(back.output_dir, Path::new("from-env"));
    assert_eq!(back.scaling.k, 1);
}
