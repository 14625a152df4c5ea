use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-sysid"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["status"], "error");
    v
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn example1_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "example1",
        "--out",
        p(dir.path()),
        "--seeds",
        "1,2",
        "--horizon",
        "300",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["seeds"], 2);
    assert_eq!(v["final_n"], 300);
    for name in [
        "example1_summary.json",
        "example1_comparison.csv",
        "example1_seed1_checkpoints.csv",
        "example1_seed2_diagnostics.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn example2_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"experiment":"example2","seeds":[7],"horizon":600,"checkpoints":[300,600]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["example2", "--config", p(&cfg), "--out", p(&out_dir)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert!(v["tracking_loss_median"].as_f64().unwrap() > 0.0);
    let run_csv = fs::read_to_string(out_dir.join("example2_seed7_run.csv")).unwrap();
    assert!(run_csv.starts_with("k,y,y_star,u0,u,dither_scale,tracking_loss"));
}

#[test]
fn simulate_then_estimate_and_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--out",
        p(dir.path()),
        "--seeds",
        "5",
        "--horizon",
        "400",
    ]);
    assert!(out.status.success());
    let ds = dir.path().join("dataset_seed5.csv");
    assert_eq!(fs::read_to_string(&ds).unwrap().lines().count(), 401);

    let est = dir.path().join("est");
    let out = run(&["estimate", "--out", p(&est), "--dataset", p(&ds)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["n"], 400);
    assert_eq!(v["estimate"]["sparse"].as_array().unwrap().len(), 14);
    assert!(est.join("estimate_checkpoints.csv").is_file());

    let diag = dir.path().join("diag");
    let out = run(&["diagnose", "--out", p(&diag), "--dataset", p(&ds)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(diag.join("diagnostics.csv")).unwrap();
    assert!(csv
        .lines()
        .next()
        .unwrap()
        .starts_with("n,status,lambda_min"));
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&[
            "example1",
            "--out",
            p(d.path()),
            "--seeds",
            "0,9",
            "--horizon",
            "200",
        ]);
        assert!(out.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 6);
    for n in names {
        assert_eq!(
            fs::read(a.path().join(&n)).unwrap(),
            fs::read(b.path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn estimate_without_dataset_fails_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["estimate", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "invalid_argument");
}

#[test]
fn malformed_config_fails_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"experiment":"example1","horizn":10}"#).unwrap();
    let out = run(&["example1", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "parse");
}

#[test]
fn missing_dataset_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = run(&["diagnose", "--out", p(dir.path()), "--dataset", p(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "io");
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");
    let out = run(&["example1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["example1", "--out", "x", "--seeds", "1,a"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn short_horizon_reports_unavailable_and_zero_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "example1",
        "--out",
        p(dir.path()),
        "--seeds",
        "1",
        "--horizon",
        "5",
    ]);
    assert!(out.status.success());
    let diag = fs::read_to_string(dir.path().join("example1_seed1_diagnostics.csv")).unwrap();
    assert!(diag.lines().nth(1).unwrap().starts_with("5,unavailable"));

    let out = run(&[
        "example1",
        "--out",
        p(dir.path()),
        "--seeds",
        "1",
        "--horizon",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "invalid_argument");
}
