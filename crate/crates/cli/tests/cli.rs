use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_annihilator"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_problem(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn constant_problem() -> Value {
    json!({
        "version": 1,
        "mode": "solve",
        "domain": "unit_interval",
        "functions": [{"kind": "polynomial", "coeffs": [1.0]}],
        "output": {"samples_n": 201}
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "one.json", &constant_problem());
    let out = run(&["solve", s(&problem)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("one.report.json")).unwrap())
            .unwrap();
    assert!(report["max_residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["passed"], true);

    let csv = fs::read_to_string(dir.path().join("one.samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,g,re_exp,im_exp"));
    assert_eq!(lines.count(), 201);

    let phase: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("one.phase.json")).unwrap())
            .unwrap();
    assert!(phase["segments"].as_array().unwrap().len() > 3);
}

#[test]
fn samples_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut problem = constant_problem();
    problem["functions"] = json!([
        {"kind": "polynomial", "coeffs": [1.0, -2.0, 0.5]},
        {"kind": "trigonometric", "constant": 0.2, "terms": [[1.0, 0.5]]}
    ]);
    let mut csvs = Vec::new();
    for run_id in 0..2 {
        problem["output"] = json!({"samples_path": format!("run{run_id}.csv"), "samples_n": 501});
        let path = write_problem(dir.path(), &format!("p{run_id}.json"), &problem);
        let out = run(&["--seed", "11", "--quiet", "solve", s(&path)]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty());
        csvs.push(fs::read(dir.path().join(format!("run{run_id}.csv"))).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn verify_accepts_solution_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "v.json", &constant_problem());
    assert_eq!(run(&["solve", s(&problem)]).status.code(), Some(0));
    let phase_path = dir.path().join("v.phase.json");
    assert_eq!(
        run(&["verify", s(&problem), s(&phase_path)]).status.code(),
        Some(0)
    );

    let mut phase: Value = serde_json::from_str(&fs::read_to_string(&phase_path).unwrap()).unwrap();
    let seg = &mut phase["segments"][2];
    let from = seg["from"].as_f64().unwrap();
    let to = seg["to"].as_f64().unwrap();
    seg["from"] = json!(from + 0.1);
    seg["to"] = json!(to + 0.1);
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, serde_json::to_string(&phase).unwrap()).unwrap();
    let out = run(&["verify", s(&problem), s(&tampered)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        run(&["solve", "/definitely/not/here.json"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let mut bad = constant_problem();
    bad.as_object_mut().unwrap().remove("functions");
    let path = write_problem(dir.path(), "bad.json", &bad);
    let out = run(&["solve", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/functions"));

    let not_json = dir.path().join("garbage.json");
    fs::write(&not_json, "{ nope").unwrap();
    assert_eq!(run(&["solve", s(&not_json)]).status.code(), Some(1));

    // mode and subcommand disagree
    let path = write_problem(dir.path(), "mode.json", &constant_problem());
    assert_eq!(run(&["orthogonalize", s(&path)]).status.code(), Some(1));

    let out = run(&["--tol", "-1", "solve", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut problem = constant_problem();
    problem["options"] = json!({"newton_max_iter": 0, "max_eps_halvings": 0});
    let path = write_problem(dir.path(), "fail.json", &problem);
    let out = run(&["solve", s(&path)]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn orthogonalize_writes_one_csv_per_phase() {
    let dir = tempfile::tempdir().unwrap();
    let problem = json!({
        "version": 1,
        "mode": "orthogonalize",
        "functions": [
            {"kind": "polynomial", "coeffs": [1.0]},
            {"re": {"kind": "polynomial", "coeffs": [1.0]}, "im": {"kind": "polynomial", "coeffs": [0.0, 1.0]}}
        ],
        "output": {"samples_n": 101}
    });
    let path = write_problem(dir.path(), "orth.json", &problem);
    let out = run(&["orthogonalize", s(&path)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for j in 1..=2 {
        let csv = fs::read_to_string(dir.path().join(format!("orth.samples.{j}.csv"))).unwrap();
        assert!(csv.starts_with("x,g,re_exp,im_exp\n"));
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("orth.report.json")).unwrap())
            .unwrap();
    assert!(report["max_inner_product"].as_f64().unwrap() < 2e-9);
}

#[test]
fn real_line_gaussian_solves() {
    let dir = tempfile::tempdir().unwrap();
    let problem = json!({
        "version": 1,
        "mode": "solve",
        "domain": "real_line",
        "functions": [{"kind": "gaussian_polynomial", "center": 0.0, "width": 1.0, "coeffs": [1.0]}],
        "transform_samples": 4097,
        "output": {"samples_n": 101}
    });
    let path = write_problem(dir.path(), "line.json", &problem);
    let out = run(&["solve", s(&path)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("line.samples.csv")).unwrap();
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(first[0].parse::<f64>().unwrap() < 0.0);
    assert_eq!(first[1], "0");
}
