use degenctl::cli::{cmd_validate, Exit, Scenario};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "form": "non_divergence",
  "coefficient": { "type": "power", "alpha": 0.5 },
  "omega": [0.3, 0.8],
  "T": 1.0,
  "n": 24,
  "m": 32
}
"#;

const SMALL_KERNEL: &str = r#"{
  "form": "non_divergence",
  "coefficient": { "type": "power", "alpha": 0.5 },
  "kernel": { "type": "constant_decay", "kappa0": 0.5, "decay": 30.0 },
  "omega": [0.3, 0.8],
  "n": 24,
  "m": 32
}
"#;

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degenctl")).args(args).env("DEGENCTL_THREADS", "2").output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_a_good_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", SMALL);
    let out = run(&["validate", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
}

#[test]
fn validate_reports_an_inadmissible_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", &SMALL.replace("\"alpha\": 0.5", "\"alpha\": 2.0"));
    let out = run(&["validate", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("alpha out of range"));
}

#[test]
fn validate_reports_a_broken_shift_budget() {
    let sc = Scenario::parse(&SMALL.replace("\"n\": 24", "\"weights\": { \"epsilon\": 0.3 },\n  \"n\": 24")).unwrap();
    let (exit, report) = cmd_validate(&sc);
    assert_eq!(exit, Exit::Fail);
    let text = report.to_string();
    assert!(text.contains("shift_budget"), "{text}");
}

#[test]
fn malformed_input_is_a_usage_error_with_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "bad.json", "{\n  \"form\": \"non_divergence\",\n  \"n\": ,\n}\n");
    let out = run(&["validate", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let err = Scenario::parse(&SMALL.replace("\"m\": 32", "\"m\": 32,\n  \"bogus\": 1")).unwrap_err();
    assert!(err.line > 0);
    assert!(err.to_string().contains("bogus"), "{err}");

    let out = run(&["validate", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn control_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = run(&["control", arg(&cfg), "--out", arg(out_dir)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("final_ratio "));
    }
    for name in ["u.csv", "y.csv", "summary.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let u = std::fs::read_to_string(a.join("u.csv")).unwrap();
    assert_eq!(u.lines().next(), Some("t,x,value"));
    assert_eq!(u.lines().count(), 1 + 33 * 25);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], serde_json::Value::Bool(true));
    assert!(summary["final_ratio"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn nonlocal_control_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "k.json", SMALL_KERNEL);
    let out = run(&["control", arg(&cfg), "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.lines().count() >= 2);

    let two = dir.path().join("two");
    let out = run(&["control", arg(&cfg), "--two-phase", "--out", arg(&two)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // The shortcut needs a kernel supported inside the control set.
    let out = run(&["control", arg(&cfg), "--shortcut", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", SMALL);
    let out = run(&["sweep", arg(&cfg), "--param", "epsilon", "--values", "0.1,0.3", "--out", arg(dir.path())]);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "param,value,status,final_ratio,cost,cg_iterations,fp_iterations,inequalities_passed,passed"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("epsilon,") && lines[2].starts_with("epsilon,"));
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["sweep", arg(&cfg), "--param", "kappa", "--values", "1", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", SMALL);
    let out = run(&["verify", arg(&cfg), "--check", "hardy", "--check", "dissipativity", "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("hardy PASS") && stdout.contains("dissipativity PASS"), "{stdout}");
    for name in ["hardy.json", "hardy.csv", "dissipativity.json", "dissipativity.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let out = run(&["verify", arg(&cfg), "--check", "nothing"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["verify", arg(&cfg), "--check", "hardy", "--s-sweep", "5:1:3"]);
    assert_eq!(out.status.code(), Some(2));
}
