use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use twogauge::report::without_timing;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twogauge"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn report(out: &Path, command: &str) -> serde_json::Value {
    let text = fs::read_to_string(out.join(format!("{command}.json"))).expect("report written");
    serde_json::from_str(&text).expect("report is JSON")
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).expect("stderr carries a JSON summary")
}

#[test]
fn torsor_selftest_is_exact_on_finite_module() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["torsor-selftest"], &config("z2_z3"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "torsor-selftest");
    assert_eq!(r["pass"], true);
    assert_eq!(r["config-hash"].as_str().unwrap().len(), 64);
    let notes = r["notes"].as_array().unwrap();
    assert!(!notes.is_empty());
    assert!(notes.iter().all(|n| n.as_str().unwrap().contains("exact")));
}

#[test]
fn abelian_stokes_meets_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "stokes"], &config("abelian"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "verify-stokes");
    let oracles: Vec<f64> = r["defects"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|d| d["quantity"] == "oracle")
        .map(|d| d["value"].as_f64().unwrap())
        .collect();
    assert!(oracles.len() >= 3);
    assert!(oracles.iter().all(|v| *v <= 1e-8));
}

#[test]
fn missing_connection_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bare.json");
    fs::write(&cfg, r#"{"seed": 1, "crossed_module": {"matrix": {"family": "su2_id_conj"}}, "paths": []}"#).unwrap();
    let o = run(&["transport"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["path"], "$.connection");
}

#[test]
fn unknown_key_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    fs::write(&cfg, r#"{"seed": 1, "crossed_module": {"preset": "z2_z3"}, "numerix": {}}"#).unwrap();
    let o = run(&["torsor-selftest"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("numerix"));
}

#[test]
fn malformed_expression_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"seed": 1, "crossed_module": {"matrix": {"family": "u1_id"}},
            "connection": {"a": [["0.3*x2 +"], ["x1"]], "b": {"fake_flat": [["0"]]}},
            "paths": [{"name": "edge", "coords": ["u", "0"]}]}"#,
    )
    .unwrap();
    let o = run(&["transport"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["path"], "$.connection.a[0][0]");
}

#[test]
fn peiffer_violation_exits_with_failure_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-crossed-module"], &config("z2_z4_inversion"), dir.path());
    assert_eq!(o.status.code(), Some(3));
    let s = stderr_json(&o);
    assert_eq!(s["pass"], false);
    let failed = s["failed-defects"].as_array().unwrap();
    assert!(failed.iter().any(|d| d["case"] == "peiffer"));
    let r = report(dir.path(), "check-crossed-module");
    assert!(r["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().starts_with("peiffer fails at")));
}

#[test]
fn same_seed_gives_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run(&["check-crossed-module", "--seed", "11"], &config("su2_axioms"), dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let ra = fs::read_to_string(a.path().join("check-crossed-module.json")).unwrap();
    let rb = fs::read_to_string(b.path().join("check-crossed-module.json")).unwrap();
    assert_eq!(without_timing(&ra), without_timing(&rb));
}

#[test]
fn sweep_writes_convergence_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["transport", "--steps", "16", "--sweep", "2"], &config("abelian"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "transport");
    let tables = r["tables"].as_array().unwrap();
    assert_eq!(tables.len(), 2);
    let csv = fs::read_to_string(dir.path().join(tables[0].as_str().unwrap())).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("steps,defect,order"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn odd_step_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["transport", "--steps", "15"], &config("abelian"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}
