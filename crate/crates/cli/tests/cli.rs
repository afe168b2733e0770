//! End-to-end runs of the `qbid` binary.

use std::path::Path;
use std::process::Command;

fn qbid(args: &[&str], out_dir: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_qbid"))
        .args(args)
        .arg("--out-dir")
        .arg(out_dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("qbid runs");
    assert!(
        out.status.success(),
        "qbid {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn gen_train_eval_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let listed = qbid(&["gen", "--seed", "3"], d);
    assert!(listed.contains("scenario.json") && listed.contains("config.json"));
    let scenario = d.join("scenario.json");
    let config = d.join("config.json");
    assert!(std::fs::read_to_string(&scenario)
        .unwrap()
        .starts_with("{\n  \"version\": 1,"));
    assert!(std::fs::read_to_string(&config)
        .unwrap()
        .starts_with("{\n  \"version\": 1,"));

    let (s, c) = (scenario.to_str().unwrap(), config.to_str().unwrap());
    qbid(
        &[
            "train",
            "--scenario",
            s,
            "--config",
            c,
            "--lambda",
            "0.7",
            "--episodes",
            "1",
        ],
        d,
    );
    let table = d.join("qtable-lambda-0.7.csv");
    assert!(first_line(&table).starts_with("qtable_version,"));

    qbid(
        &[
            "eval",
            "--scenario",
            s,
            "--qtable",
            table.to_str().unwrap(),
            "--lambda",
            "0.7",
        ],
        d,
    );
    assert_eq!(
        first_line(&d.join("report.csv")),
        "report_version,lambda,seed"
    );

    qbid(&["baseline", "--scenario", s], d);
    assert!(first_line(&d.join("baseline.csv")).starts_with("version,"));
    assert!(first_line(&d.join("snapshots.csv")).starts_with("version,"));
    assert!(!d.join("events.ndjson").exists());
}

#[test]
fn sweep_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--seed", "4", "--episodes", "1", "--lambda", "0,1"];
    qbid(&args, &dir.path().join("a"));
    qbid(&args, &dir.path().join("b"));
    for file in ["sweep.csv", "curve.csv", "runs.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
        assert!(a.starts_with(b"version,"));
    }
    let rows = std::fs::read_to_string(dir.path().join("a/sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qbid"))
        .args(["eval", "--qtable", "/nonexistent/q.csv", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/q.csv"));

    let out = Command::new(env!("CARGO_BIN_EXE_qbid"))
        .args(["sweep", "--lambda", "1.5", "--episodes", "1", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
