use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(file: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(file).to_str().unwrap().to_string()
}

fn lw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lw")).args(args).output().expect("spawn lw")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn check_prints_the_type_table() {
    let o = lw(&["check", &corpus("turn_red.lw")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "turnRedOnClick : ∀(i:Id). Widget i ⊸ Widget i"), "{}", stdout(&o));
}

#[test]
fn check_reports_select_violations() {
    let o = lw(&["check", &corpus("zip_attempt.lw")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("11:56: LinearVariableUnavailableInSelect"), "{}", stderr(&o));

    let j = lw(&["check", "--format", "json", &corpus("zip_attempt.lw")]);
    assert_eq!(j.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert_eq!(v["ok"], false);
    assert_eq!(v["errors"][0]["kind"], "LinearVariableUnavailableInSelect");
}

#[test]
fn missing_files_are_environment_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.lw");
    assert_eq!(lw(&["check", missing.to_str().unwrap()]).status.code(), Some(2));
    let trace = dir.path().join("none.jsonl");
    let o = lw(&["run", &corpus("turn_red.lw"), "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_json_is_canonical_and_can_include_a_derivation() {
    let args = ["check", "--format", "json", "--derivation", "turnRedOnClick", &corpus("turn_red.lw")];
    let a = lw(&args);
    let b = lw(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["types"][0]["name"], "turnRedOnClick");
    assert!(v["derivation"]["nodes"].as_array().unwrap().iter().any(|n| n["rule"] == "I_τ-E" && n["line"] == 6));
}

#[test]
fn run_follows_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("click5.jsonl");
    std::fs::write(&trace, "{\"t\":5,\"widget\":0,\"kind\":\"click\"}\n").unwrap();
    let o = lw(&["run", &corpus("turn_red.lw"), "--trace", trace.to_str().unwrap(), "--horizon", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["logbooks"][0]["entries"], serde_json::json!([[0, "onClick"], [5, "setColor", "Red"]]));
    assert_eq!(v["horizon"], 8);
}

#[test]
fn runs_are_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("tie.jsonl");
    std::fs::write(&trace, "{\"t\":2,\"widget\":0,\"kind\":\"click\"}\n{\"t\":2,\"widget\":0,\"kind\":\"keypress\",\"char\":\"k\"}\n").unwrap();
    let args = ["run", &corpus("change_color.lw"), "--trace", trace.to_str().unwrap(), "--horizon", "4", "--tie", "seed:7"];
    let a = lw(&args);
    let b = lw(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["choice_log"].as_array().unwrap().len(), 1);
}

#[test]
fn runtime_failures_are_domain_failures() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.jsonl");
    std::fs::write(&trace, "{\"t\":3,\"widget\":4,\"kind\":\"click\"}\n").unwrap();
    let o = lw(&["run", &corpus("turn_red.lw"), "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("TraceTargetInvalid"));
    std::fs::write(&trace, "{\"t\":3}\n").unwrap();
    let o = lw(&["run", &corpus("turn_red.lw"), "--trace", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn enumerate_lists_every_outcome() {
    let o = lw(&["enumerate", &corpus("turn_red.lw"), "--horizon", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["count"], 5);
    assert_eq!(v["outcomes"].as_array().unwrap().len(), 5);
    let small = lw(&["enumerate", &corpus("button_stack.lw"), "--horizon", "4", "--limit", "100"]);
    assert_eq!(small.status.code(), Some(1));
    assert!(stderr(&small).contains("TooManyBranches"));
}

#[test]
fn conform_accepts_the_corpus() {
    let o = lw(&["conform", &corpus(""), "--horizon", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let programs = v["programs"].as_array().unwrap();
    let find = |name: &str| programs.iter().find(|p| p["file"].as_str().unwrap().ends_with(name)).unwrap();
    assert_eq!(find("turn_red.lw")["status"], "conformant");
    assert_eq!(find("turn_red.lw")["effective_horizon"], 6);
    assert_eq!(find("button_stack.lw")["effective_horizon"], 4);
    assert_eq!(find("zip_attempt.lw")["status"], "skipped");
    assert_eq!(find("interleave.lw")["status"], "skipped");
    assert_eq!(find("s4_3.lw")["status"], "skipped");
}
