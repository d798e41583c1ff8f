//! Exit codes and artifacts of the `conedp` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems")
}

fn conedp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conedp")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn desk() -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(problems().join("desk1.json")).unwrap()).unwrap()
}

fn write_problem(dir: &Path, name: &str, v: &serde_json::Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn solve_desk(dir: &Path) -> (String, String) {
    let problem = problems().join("desk1.json").to_str().unwrap().to_string();
    let field = dir.join("field").to_str().unwrap().to_string();
    let out = conedp(&["solve", &problem, &field]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (problem, field)
}

#[test]
fn solve_then_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let (problem, field) = solve_desk(tmp.path());
    assert!(Path::new(&field).join("front_initial.csv").exists());
    let report = tmp.path().join("report.json");
    let out = conedp(&[
        "verify", &problem, &field, "--check", "dpp", "--check", "contingent", "--check", "lipschitz", "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    assert!(r["checks"]["lipschitz"]["violations"] == 0);
}

#[test]
fn malformed_problem_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.json");
    fs::write(&p, "{\"schema\": 1, \"problem\": ").unwrap();
    let out = conedp(&["solve", p.to_str().unwrap(), tmp.path().join("f").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("malformed"), "{}", stderr(&out));

    let out = conedp(&["solve", tmp.path().join("missing.json").to_str().unwrap(), "x"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn escaping_trajectories_are_numeric_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = desk();
    // a box barely wider than the start: every move leaves it
    v["grid"] = serde_json::json!({ "lower": [0.4], "upper": [0.6], "nodes": [3] });
    let p = write_problem(tmp.path(), "tiny.json", &v);
    let out = conedp(&["solve", &p, tmp.path().join("f").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("escape"), "{}", stderr(&out));
}

#[test]
fn corrupted_front_is_a_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let (problem, field) = solve_desk(tmp.path());
    let slice = Path::new(&field).join("slice_0001.csv");
    let text = fs::read_to_string(&slice).unwrap();
    let first = text.lines().next().unwrap();
    let mut cols: Vec<f64> = first.split(',').map(|c| c.trim().parse().unwrap()).collect();
    // a dominated copy of an existing point in the same node
    cols[1] += 1.0;
    cols[2] += 1.0;
    let line = format!("{},{:?},{:?}\n", cols[0] as usize, cols[1], cols[2]);
    fs::write(&slice, format!("{text}{line}")).unwrap();
    let out = conedp(&["verify", &problem, &field, "--check", "dpp"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("antichain"), "{}", stderr(&out));
}

#[test]
fn edited_problem_does_not_match_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, field) = solve_desk(tmp.path());
    let mut v = desk();
    v["tolerances"] = serde_json::json!({ "estimate": 1e-5 });
    let p = write_problem(tmp.path(), "edited.json", &v);
    let out = conedp(&["verify", &p, &field, "--check", "contingent"]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
}

#[test]
fn oracle_cap_is_enforced() {
    let tmp = tempfile::tempdir().unwrap();
    let problem = problems().join("desk1.json");
    let out = conedp(&["oracle", problem.to_str().unwrap(), tmp.path().to_str().unwrap(), "--cap", "10"]);
    assert_eq!(code(&out), 6, "{}", stderr(&out));
    let out = conedp(&["oracle", problem.to_str().unwrap(), tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["oracle_front.csv", "oracle_cloud.csv", "oracle.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}

#[test]
fn lipschitz_check_needs_the_outer_cone() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = desk();
    v.as_object_mut().unwrap().remove("outer_cone");
    let p = write_problem(tmp.path(), "no_c.json", &v);
    let out = conedp(&["verify", &p, tmp.path().to_str().unwrap(), "--check", "lipschitz"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cone C required"), "{}", stderr(&out));
}

#[test]
fn scalar_oracle_rejects_vector_costs() {
    let tmp = tempfile::tempdir().unwrap();
    let problem = problems().join("desk1.json");
    let out = conedp(&["oracle", problem.to_str().unwrap(), tmp.path().to_str().unwrap(), "--scalar"]);
    assert_eq!(code(&out), 2);

    let scalar = problems().join("scalar_quadratic.json");
    let out = conedp(&["oracle", scalar.to_str().unwrap(), tmp.path().to_str().unwrap(), "--scalar"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = fs::read_to_string(tmp.path().join("scalar_table.csv")).unwrap();
    assert!(table.lines().count() > 100);
}

#[test]
fn unknown_check_is_rejected_by_the_parser() {
    let out = conedp(&["verify", "a.json", "dir", "--check", "everything"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn info_summarizes_a_problem() {
    let out = conedp(&["info", problems().join("planar.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("planar"));
}
