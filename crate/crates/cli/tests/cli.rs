use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hloop")).args(args).output().expect("spawn hloop")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn default_invariants_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("inv");
    let o = hloop(&["invariants", "--out", out.to_str().unwrap(), "--loops", "8"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert_eq!(report(&out)["seed"], 1);
}

#[test]
fn eps_field_only_trips_the_advisory() {
    let tmp = tempfile::tempdir().unwrap();
    let field = write(tmp.path(), "eps.json", r#"{"kind": "radial_eps", "eps": 0.5}"#);
    let out = tmp.path().join("inv");
    let o = hloop(&["invariants", "--field", &field, "--out", out.to_str().unwrap(), "--loops", "6"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.matches("NOTE").count(), 1, "{stdout}");
    assert!(stdout.contains("NOTE N_H < 1"));
}

#[test]
fn malformed_json_exits_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let field = write(tmp.path(), "bad.json", "{\"kind\": \"constant\",\n \"value\": 1,,\n}");
    let o = hloop(&["solve", "--field", &field, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let field = write(tmp.path(), "f.json", r#"{"kind": "constant", "value": 1, "colour": "red"}"#);
    let o = hloop(&["solve", "--field", &field]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write(tmp.path(), "run.json", r#"{"seed": 3, "tolerance": 1e-6}"#);
    let o = hloop(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn nonpositive_tolerance_exits_2() {
    let o = hloop(&["solve", "--tol", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn appendix_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hloop(&["appendix", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(tmp.path());
    let root = r["circle_roots"][0].as_f64().unwrap();
    assert!((root - 0.5392).abs() < 1e-4);
}

#[test]
fn solve_writes_loop_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let field = write(tmp.path(), "hbt.json", r#"{"kind": "radial_beta_t", "beta": 2, "t": 0.5}"#);
    let out = tmp.path().join("solve");
    let o = hloop(&["solve", "--field", &field, "--init", "circle:0.6", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let r = report(&out);
    assert_eq!(r["report"]["outcome"], "converged_loop");
    assert!(r["shooting"]["defect"].as_f64().unwrap() < 1e-8);
    let csv = std::fs::read_to_string(out.join("loop.csv")).unwrap();
    assert_eq!(csv.lines().count(), 129);
    assert!(std::fs::read_to_string(out.join("loop.svg")).unwrap().starts_with("<svg"));
    assert!(out.join("trace.csv").exists());
}

#[test]
fn flat_mountain_pass_level_is_half() {
    let tmp = tempfile::tempdir().unwrap();
    let field = write(tmp.path(), "c1.json", r#"{"kind": "constant", "value": 1}"#);
    let out = tmp.path().join("mp");
    let o = hloop(&["mountain-pass", "--field", &field, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v = report(&out)["report"]["value"].as_f64().unwrap();
    assert!((v - 0.5).abs() < 1e-3, "{v}");
    assert!(out.join("path").join("manifest.json").exists());
}

#[test]
fn shooting_unit_circle_closes() {
    let tmp = tempfile::tempdir().unwrap();
    let field = write(tmp.path(), "c1.json", r#"{"kind": "constant", "value": 1}"#);
    let o = hloop(&["shoot", "--field", &field, "--c", "1", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let d = report(tmp.path())["report"]["defect"].as_f64().unwrap();
    assert!(d < 1e-10, "{d}");
}

#[test]
fn hardy_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hloop(&["hardy", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(tmp.path().join("k.csv").exists() && tmp.path().join("dl_k.json").exists());
}

#[test]
fn coarse_hardy_grid_fails_the_mollifier_check() {
    // at h = S/128 the residual is about 2e-3, above the 1e-3 bound
    let tmp = tempfile::tempdir().unwrap();
    let o = hloop(&["hardy", "--grid", "128", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL mollification identity"));
}

#[test]
fn reports_are_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = hloop(&["invariants", "--seed", "7", "--loops", "5", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let ra = std::fs::read(a.join("report.json")).unwrap();
    let rb = std::fs::read(b.join("report.json")).unwrap();
    assert_eq!(ra, rb);
}
