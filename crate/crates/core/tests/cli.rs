//! End-to-end runs of the command-line binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affgebroid")).args(args).output().expect("binary runs")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn shipped_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    for (name, files) in [
        ("ball_check.json", vec!["report.json"]),
        ("ball_bracket.json", vec!["bracket.csv"]),
        ("jet_derive.json", vec!["derive.csv", "derive.json"]),
        ("knife_edge.json", vec!["report.json"]),
    ] {
        let out = dir.path().join(name);
        let o = run_config(&config_path(name), &out, &[]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(out.join(f).is_file(), "{name}: missing {f}");
        }
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ball_check.json/report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["samples"], 100);
}

#[test]
fn simulation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("ball_simulate.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run_config(&cfg, out, &["--t1", "0.5", "--step", "0.01"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trajectory.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,t,x,y,xd,yd,wx,wy,wz,drift");
    assert_eq!(csv.lines().count(), 52);
}

#[test]
fn seeded_runs_repeat_and_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("ball_bracket.json");
    let read = |seed: &str, tag: &str| {
        let out = dir.path().join(tag);
        assert!(run_config(&cfg, &out, &["--seed", seed]).status.success());
        std::fs::read(out.join("bracket.csv")).unwrap()
    };
    let (a, b, c) = (read("9", "a"), read("9", "b"), read("10", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn hamiltonian_side_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    let o = run_config(&config_path("ball_simulate.json"), &out, &["--t1", "0.2", "--step", "0.01", "--hamiltonian"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,t,x,y,p_xd,p_yd,p_wx,p_wy,p_wz,drift\n"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["side"], "hamiltonian");
    assert!(summary["max_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "system": {"catalog": "ball"},
            "tolerances": {"checks": {"tangency": -1.0}},
            "run": {"command": "check", "samples": 2}}"#,
    );
    let o = run_config(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("out/report.json").is_file());
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\"schema_version\": 1,\n \"system\": {\"catalog\": \"ball\",}}");
    let o = run_config(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_system_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "system": {
            "base": ["q"], "fibre": ["v"], "rho": [[1]], "lagrangian": "0.5*v^2",
            "constraints": [{"mu0": 0, "mu": [1]}, {"mu0": 1, "mu": [2]}]}}"#,
    );
    let o = run_config(&cfg, &dir.path().join("out"), &["--command", "check"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("system.constraints"));
}

#[test]
fn missing_config_file() {
    let o = run(&["--config", "/nonexistent/affgebroid.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bracket_of_h_with_itself_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "system": {"catalog": "ball"}, "run": {"command": "bracket", "samples": 5}}"#,
    );
    let out = dir.path().join("out");
    assert!(run_config(&cfg, &out, &[]).status.success());
    let csv = std::fs::read_to_string(out.join("bracket.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(v.abs() <= 1e-12, "{v}");
    }
}
