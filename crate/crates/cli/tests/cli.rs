use std::process::{Command, Output};

use qpdesign_service::api::{self, Defaults, Endpoint};
use qpdesign::Progress;
use serde_json::{json, Value};

fn qpdesign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpdesign")).args(args).output().unwrap()
}

fn json_out(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn service(endpoint: Endpoint, body: Value) -> Value {
    api::handle(endpoint, body, &Defaults { grid: [400, 400] }, &Progress::new())
        .unwrap()
        .to_json()
}

#[test]
fn control_mid_exit_codes() {
    let out = qpdesign(&["control-mid", "--n", "2", "--m", "0", "--a", "39.478,0", "--tau", "0.12"]);
    let v = json_out(&out);
    assert!((v[0]["assigned_root"].as_f64().unwrap() + 2.859).abs() < 5e-3);

    let out = qpdesign(&["control-mid", "--n", "2", "--m", "0", "--a", "39.478,0", "--tau", "0.2"]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["code"], "no_admissible_point");

    let out = qpdesign(&["control-mid", "--n", "two", "--m", "0", "--a", "1,0", "--tau", "0.1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = qpdesign(&["generic-mid", "--n", "0", "--m", "0", "--tau", "1", "--s0", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_and_input_file_agree_with_service() {
    let body = json!({"n": 2, "m": 0, "tau": 1, "s0": -0.5});
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("req.json");
    std::fs::write(&path, body.to_string()).unwrap();

    let from_flags = json_out(&qpdesign(&["generic-mid", "--n", "2", "--m", "0", "--tau", "1", "--s0", "-0.5"]));
    let from_file = json_out(&qpdesign(&["generic-mid", "--input", path.to_str().unwrap()]));
    assert_eq!(from_flags, from_file);
    assert_eq!(from_flags, service(Endpoint::GenericMid, body));
}

#[test]
fn roots_csv_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roots.csv");
    let out = qpdesign(&[
        "roots", "--n", "1", "--m", "0", "--a", "-1", "--b", "1", "--tau", "1",
        "--rect", "-1,1,-1,1", "--format", "csv", "--output", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re,im,multiplicity,residual"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[2], "2");
    assert!(row[0].parse::<f64>().unwrap().abs() < 1e-8);
}

#[test]
fn simulate_csv_has_header_and_history() {
    let out = qpdesign(&[
        "simulate", "--n", "1", "--m", "0", "--a", "1", "--b", "0.5", "--tau", "1",
        "--ic", "constant:1", "-T", "2", "--steps", "10", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,y");
    assert_eq!(lines.len(), 1 + 31);
    assert!(lines[1].starts_with("-1.0000000000000000e0,1.0000000000000000e0"));
}

#[test]
fn sensitivity_matches_service() {
    let q = json!({"n": 2, "m": 0, "a": [39.47841760435743, 0.0], "b": [-33.81318677463476], "tau": 0.12});
    let body = json!({"q": q, "epsilon": 0.001, "K": 2, "rect": {"x_min": -6, "x_max": -0.5, "y_min": -3, "y_max": 3}});
    let cli = json_out(&qpdesign(&[
        "sensitivity", "--n", "2", "--m", "0", "--a", "39.47841760435743,0", "--b", "-33.81318677463476",
        "--tau", "0.12", "--epsilon", "0.001", "-K", "2", "--rect", "-6,-0.5,-3,3",
    ]));
    assert_eq!(cli, service(Endpoint::Sensitivity, body));
}

#[test]
fn csv_is_rejected_for_designs() {
    let out = qpdesign(&["generic-mid", "--n", "1", "--m", "0", "--tau", "1", "--s0", "0", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_from_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let body = json!({
        "design": {"mode": "control-mid", "n": 2, "m": 0, "a": [39.478, 0], "given": {"tau": 0.12}},
        "rect": {"x_min": -100, "x_max": 10, "y_min": -100, "y_max": 100}
    });
    std::fs::write(&path, body.to_string()).unwrap();
    let a = qpdesign(&["report", "-i", path.to_str().unwrap()]);
    let b = qpdesign(&["report", "-i", path.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["dominance"]["dominant"], true);
}
