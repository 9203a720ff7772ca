//! Behavioral tests against the built binary.

use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn rateroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rateroute"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rateroute_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_rateroute"))
        .args(args)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .expect("binary spawns");
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().expect("binary finishes")
}

fn parse_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const DIAMOND: &str = r#"{
    "nodes": ["s", "a", "b", "t"],
    "edges": [
        {"id": 0, "u": "s", "v": "a"},
        {"id": 1, "u": "a", "v": "t"},
        {"id": 2, "u": "s", "v": "b"},
        {"id": 3, "u": "b", "v": "t"}
    ],
    "demands": [
        {"src": "s", "dst": "t", "amount": 1},
        {"src": "s", "dst": "t", "amount": 1}
    ],
    "rates": [{"speed": 1, "cost": 1}, {"speed": 2, "cost": 10}]
}"#;

#[test]
fn solve_matches_oracle_on_the_diamond() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diamond.json");
    std::fs::write(&path, DIAMOND).unwrap();
    let path = path.to_str().unwrap();

    let solve = parse_stdout(&rateroute(&[
        "solve",
        path,
        "--clamp-beta",
        "--trials",
        "64",
        "--seed",
        "11",
    ]));
    let oracle = parse_stdout(&rateroute(&["oracle", path]));
    assert_eq!(oracle["optimal_cost"].as_f64().unwrap(), 4.0);
    assert_eq!(oracle["certified"], Value::Bool(true));
    assert_eq!(solve["total_cost"].as_f64().unwrap(), 4.0);
}

#[test]
fn fit_reports_zero_exponent_for_single_state() {
    let instance = r#"{
        "nodes": ["a", "b"],
        "edges": [{"id": 0, "u": "a", "v": "b"}],
        "demands": [{"src": "a", "dst": "b", "amount": 1}],
        "rates": [{"speed": 4.0, "cost": 2.0}]
    }"#;
    let fit = parse_stdout(&rateroute_stdin(&["fit"], instance));
    assert!(fit["beta"].as_f64().unwrap().abs() < 1e-9);
    assert!((fit["mu"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!((fit["gap"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(fit["bounds"]["holds"].is_null());
}

#[test]
fn fit_accepts_rates_only_input() {
    let rates_only = r#"{"rates": [{"speed": 2.0, "cost": 1.0}, {"speed": 4.0, "cost": 8.0}]}"#;
    let fit = parse_stdout(&rateroute_stdin(&["fit"], rates_only));
    assert!((fit["beta"].as_f64().unwrap() - 2.25).abs() < 1e-9);
    assert_eq!(fit["bounds"]["intersects_each_step"], Value::Bool(true));
}

#[test]
fn relax_emits_flows_and_certificate() {
    let relax = parse_stdout(&rateroute_stdin(&["relax", "--clamp-beta"], DIAMOND));
    assert!(relax["converged"].as_bool().unwrap());
    assert!(relax["duality_gap"].as_f64().unwrap() <= 1e-4);
    let loads = relax["loads"].as_array().unwrap();
    assert_eq!(loads.len(), 4);
    let total: f64 = loads.iter().map(|l| l.as_f64().unwrap()).sum();
    assert!((total - 4.0).abs() < 1e-6);
}

#[test]
fn gen_is_deterministic_and_self_consistent() {
    let args = [
        "gen",
        "--nodes",
        "6",
        "--edge-prob",
        "0.5",
        "--demands",
        "2",
        "--seed",
        "21",
    ];
    let a = rateroute(&args);
    let b = rateroute(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    // The generated instance feeds straight back into fit.
    let text = String::from_utf8(a.stdout).unwrap();
    let fit = parse_stdout(&rateroute_stdin(&["fit"], &text));
    assert!(fit["gap"].as_f64().unwrap() >= 1.0);
}

#[test]
fn bad_input_yields_error_json_and_nonzero_exit() {
    let out = rateroute_stdin(&["solve"], "{ not json");
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert!(err["error"].is_string());

    let degenerate = r#"{
        "nodes": ["a", "b"],
        "edges": [{"id": 0, "u": "a", "v": "b"}],
        "demands": [{"src": "a", "dst": "a", "amount": 1}],
        "rates": [{"speed": 2.0, "cost": 1.0}]
    }"#;
    let out = rateroute_stdin(&["oracle"], degenerate);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("degenerate demand"));
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fit.json");
    let out = rateroute_stdin(&["fit", "-", "--out", path.to_str().unwrap()], DIAMOND);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let fit: Value = serde_json::from_str(&text).unwrap();
    assert!(fit["sigma"].as_f64().unwrap() >= 1.0);
}
