use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gwgl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwgl"))
        .args(args)
        .current_dir(dir)
        .env("GWGL_THREADS", "1")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gwgl(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(gwgl(dir.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(gwgl(dir.path(), &["fit", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gwgl(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(gwgl(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        gwgl(dir.path(), &["generate", "--rho-w", "1.5", "-o", "a.csv"])
            .status
            .code(),
        Some(2)
    );
    assert!(!dir.path().join("a.csv").exists());
}

#[test]
fn missing_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = gwgl(dir.path(), &["cluster", "--data", "nowhere.csv", "-o", "g.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere.csv"), "{err}");
    assert!(!dir.path().join("g.json").exists());
}

#[test]
fn mixture_oracle_reports_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = gwgl(dir.path(), &["oracle-check", "mixture", "--q", "0.2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["ratio"].as_f64().unwrap() - 4.0).abs() <= 1e-9);
    assert_eq!(v["pass"], Value::Bool(true));
}

#[test]
fn fit_then_evaluate_reproduces_the_objective() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        gwgl(d, &["generate", "--seed", "4", "-n", "80", "-o", "a.csv"])
            .status
            .code(),
        Some(0)
    );
    assert!(d.join("a.meta.json").exists());
    assert_eq!(
        gwgl(d, &["cluster", "--data", "a.csv", "-o", "g.json"]).status.code(),
        Some(0)
    );
    for (model, extra) in [
        ("gwgl-lr", &[][..]),
        ("glasso-l2", &[][..]),
        ("latent-overlap", &["--loss", "lad"][..]),
    ] {
        let mut args = vec![
            "fit",
            "--data",
            "a.csv",
            "--groups",
            "g.json",
            "--model",
            model,
            "--epsilon",
            "0.03",
        ];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["-o", "m.json"]);
        assert_eq!(gwgl(d, &args).status.code(), Some(0), "{model}");
        assert_eq!(
            gwgl(d, &["evaluate", "--model", "m.json", "--data", "a.csv", "-o", "e.json"])
                .status
                .code(),
            Some(0)
        );
        let fit = json(&d.join("m.json"));
        let eval = json(&d.join("e.json"));
        assert_eq!(fit["fit"]["objective"], eval["objective"], "{model}");
        let rr = eval["oracle"]["rr"].as_f64().unwrap();
        assert!(rr.is_finite() && rr >= 0.0);
    }
}

#[test]
fn binary_fit_with_tuning() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        gwgl(d, &["generate", "--seed", "2", "--binary", "-o", "b.csv"])
            .status
            .code(),
        Some(0)
    );
    let out = gwgl(
        d,
        &[
            "fit",
            "--data",
            "b.csv",
            "--model",
            "gwgl-lg",
            "--auto-cluster",
            "--tune",
            "--grid-size",
            "6",
            "-o",
            "m.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&d.join("m.json"));
    let grid = m["tuning"]["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 6);
    assert!(grid.contains(&m["epsilon"]));
    assert_eq!(
        gwgl(d, &["evaluate", "--model", "m.json", "--data", "b.csv", "-o", "e.json"])
            .status
            .code(),
        Some(0)
    );
    let acc = json(&d.join("e.json"))["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn failed_check_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // one iteration cannot certify convergence
    assert_eq!(gwgl(dir.path(), &["generate", "-o", "a.csv"]).status.code(), Some(0));
    let out = gwgl(
        dir.path(),
        &[
            "fit",
            "--data",
            "a.csv",
            "--auto-cluster",
            "--epsilon",
            "0.01",
            "--max-iters",
            "1",
            "-o",
            "m.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
}
