use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_insider-lab");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_shows_all_kinds() {
    let out = run(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for kind in [
        "decomposition",
        "forward-convergence",
        "hjb-residual",
        "example1",
        "example2",
        "perturbation",
        "martingale",
    ] {
        assert!(text.lines().any(|l| l == kind), "missing {kind}");
    }
}

#[test]
fn equal_horizons_exit_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        "{\n  \"kind\": \"example1\",\n  \"model\": {\n    \"horizon\": 1.0,\n    \"info_horizon\": 1.0\n  }\n}\n",
    );
    let out = run(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.json:5:"), "{err}");
    assert!(err.contains("T < T1"), "{err}");
}

#[test]
fn unknown_kind_names_nearest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.json", "{\"kind\": \"exampel1\"}\n");
    let out = run(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("example1"), "{err}");
}

#[test]
fn malformed_json_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "broken.json", "{\n  \"kind\": \"decomposition\",\n  \"seed\": ,\n}\n");
    let out = run(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("broken.json:3:"));
}

#[test]
fn divergence_exits_3() {
    // an explosive constant control on the wealth dynamics overflows the state
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "blowup.json",
        r#"{"kind": "example1", "n_paths": 50, "n_steps": 64, "dominance_paths": 50,
            "model": {"r": 0.0, "x0": 1e308},
            "policies": [{"kind": "constant", "value": 1e308}]}"#,
    );
    let out = run(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn reruns_are_byte_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.json",
        r#"{"kind": "perturbation", "seed": 7, "n_paths": 400, "n_steps": 128}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o = run(&["run", &cfg, "--out", out.to_str().unwrap(), "--workers", workers]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    }
    let csv_a = std::fs::read(a.join("perturbation.csv")).unwrap();
    let csv_b = std::fs::read(b.join("perturbation.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.json",
        r#"{"kind": "decomposition", "seed": 1, "n_paths": 200, "n_steps": 64}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["run", &cfg, "--out", a.to_str().unwrap()]);
    run(&["run", &cfg, "--out", b.to_str().unwrap(), "--seed", "2", "--n-paths", "300"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("decomposition.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 2);
    assert_eq!(summary["config"]["n_paths"], 300);
    assert_ne!(
        std::fs::read(a.join("decomposition.csv")).unwrap(),
        std::fs::read(b.join("decomposition.csv")).unwrap()
    );
}
