use std::path::Path;
use std::process::{Command, Output};

fn polycurve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polycurve")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_spec(dir: &Path, body: &str) -> String {
    let path = dir.join("spec.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const QUICK: &str = r#"{"kind": "tip-contact", "theta_deg": 48, "delta_deg": 135, "duration_s": 0.5, "rate_hz": 20,
  "noise": {"position_mm": 0, "rotation_deg": 0, "tension_n": 0}}"#;

#[test]
fn simulate_estimate_force_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = write_spec(d, QUICK);
    let log = d.join("log");
    let out = polycurve(&["simulate", "--spec", &spec, "--out", log.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["scenario.csv", "truth.csv", "polyline.csv", "scenario.json"] {
        assert!(log.join(name).exists(), "{name}");
    }

    let est = d.join("est");
    let out = polycurve(&["estimate", log.to_str().unwrap(), "--model", "cc", "--out", est.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(est.join("estimates.csv").exists());

    let force = d.join("force");
    let out = polycurve(&["force", log.to_str().unwrap(), "--out", force.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(force.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "shape-force");
    assert_eq!(summary["model"], "poly2");
    assert_eq!(summary["force"]["levels"].as_array().unwrap().len(), 5);
    assert!(force.join("estimates.json").exists());
}

#[test]
fn seed_flag_overrides_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = write_spec(d, r#"{"kind": "chirp", "theta_deg": 30, "delta_deg": 0, "duration_s": 0.2, "rate_hz": 50, "seed": 1}"#);
    let run = |seed: &str, name: &str| {
        let out = d.join(name);
        assert_eq!(code(&polycurve(&["simulate", "--spec", &spec, "--seed", seed, "--out", out.to_str().unwrap()])), 0);
        std::fs::read(out.join("scenario.csv")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "c"), run("6", "d"));
}

#[test]
fn invalid_spec_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"kind": "wobble", "theta_deg": 30, "delta_deg": 0}"#);
    let out = polycurve(&["simulate", "--spec", &spec, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind"));
}

#[test]
fn bad_arguments_exit_with_validation_code() {
    assert_eq!(code(&polycurve(&["estimate", "x", "--model", "spline", "--out", "y"])), 1);
    assert_eq!(code(&polycurve(&["frobnicate"])), 1);
    assert_eq!(code(&polycurve(&["--help"])), 0);
}

#[test]
fn missing_files_exit_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = polycurve(&["simulate", "--spec", missing.join("s.json").to_str().unwrap(), "--out", "unused"]);
    assert_eq!(code(&out), 3);
    let out = polycurve(&["estimate", missing.to_str().unwrap(), "--out", dir.path().join("e").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn corrupted_log_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = write_spec(d, QUICK);
    let log = d.join("log");
    assert_eq!(code(&polycurve(&["simulate", "--spec", &spec, "--out", log.to_str().unwrap()])), 0);
    let path = log.join("scenario.csv");
    let text = std::fs::read_to_string(&path).unwrap().replacen("v1.0", "v9.0", 1);
    std::fs::write(&path, text).unwrap();
    let out = polycurve(&["estimate", log.to_str().unwrap(), "--out", d.join("e").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("major version 9"));
}

#[test]
fn jacobian_check_reports_in_both_formats() {
    let out = polycurve(&["jacobian-check", "--seed", "3"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["states"], 100);

    let dir = tempfile::tempdir().unwrap();
    let out = polycurve(&["jacobian-check", "--format", "csv", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("jacobian-check.csv")).unwrap();
    assert!(text.starts_with("# polycurve-report v1.0\nkey,value\n"));
    assert!(text.contains("passed,true"));
}

#[test]
fn verify_exits_cleanly_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = polycurve(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "polycurve-verify");
    assert_eq!(report["passed"], true);
}
