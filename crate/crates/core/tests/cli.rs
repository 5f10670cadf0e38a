use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invariant-kit"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(config: &str, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(example(config)).arg("--out").arg(out).args(extra).output().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn statuses(r: &Value) -> Vec<String> {
    r["jobs"].as_array().unwrap().iter().map(|j| j["status"].as_str().unwrap().to_string()).collect()
}

#[test]
fn cube_example_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("example1.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["schema"], 1);
    assert_eq!(statuses(&r), ["fail", "fail", "inconclusive", "fail", "pass"]);
    assert_eq!(r["exit_code"], 1);
    assert!(dir.path().join("01_certify.csv").exists());
}

#[test]
fn linear_example_passes_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("example2.json", a.path(), &[]).status.code(), Some(0));
    assert_eq!(run("example2.json", b.path(), &["--threads", "1"]).status.code(), Some(0));
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
    assert!(ra.ends_with(b"\n"));
    let r = report(a.path());
    assert!(r["tolerances"].is_object());
    assert_eq!(statuses(&r), ["pass", "pass", "pass", "pass", "info"]);
}

#[test]
fn seed_changes_random_draws_only_when_asked() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run("example2.json", a.path(), &["--seed", "5"]);
    run("example2.json", b.path(), &["--seed", "6"]);
    let (ra, rb) = (report(a.path()), report(b.path()));
    assert_eq!(ra["seed"], 5);
    assert_ne!(ra["jobs"][2], rb["jobs"][2]);
    assert_eq!(ra["jobs"][1], rb["jobs"][1]);
}

#[test]
fn safety_filter_example_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("appendix_qp.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let mut rows = csv::Reader::from_path(dir.path().join("02_qp_scan.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    assert_eq!(&headers, vec!["x1", "u1", "active_set", "jump_quotient", "strict_interior"]);
    let mut count = 0;
    for rec in rows.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[0].parse().unwrap();
        let u: f64 = rec[1].parse().unwrap();
        assert!((u - (-x).max(0.0)).abs() <= 1e-6, "x = {x}, u = {u}");
        count += 1;
    }
    assert_eq!(count, 300);
}

#[test]
fn time_varying_example_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("time_varying.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn config_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"kind": "mbf", "states": ["x"], "unknown": 1}"#).unwrap();
    let out = bin().arg("run").arg(&bad).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn check_mu_exit_codes() {
    let code = |args: &[&str]| bin().arg("check-mu").args(args).output().unwrap().status.code();
    assert_eq!(code(&["-1 + w"]), Some(0));
    assert_eq!(code(&["3*cbrt(w)^2"]), Some(1));
    assert_eq!(code(&["2*w", "--lipschitz"]), Some(0));
    assert_eq!(code(&["w +"]), Some(3));
}

#[test]
fn version_prints() {
    let out = bin().arg("version").output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("invariant-kit "));
    assert_eq!(bin().arg("bogus").output().unwrap().status.code(), Some(3));
}
