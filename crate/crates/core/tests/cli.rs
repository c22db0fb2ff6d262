use std::io::Write;
use std::process::{Command, Output, Stdio};

use cpmap::cli::{census, Report, EXIT_NOT_STAR_LINEAR, EXIT_OK, EXIT_PARSE, OPEN_COMPLEX_M3};

fn cpmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpmap")).args(args).output().unwrap()
}

fn cpmap_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_cpmap"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analyze_json_is_deterministic_and_round_trips() {
    let args = ["analyze", "zoo:toeplitz2x2", "--json", "--budget", "16"];
    let a = cpmap(&args);
    let b = cpmap(&args);
    assert_eq!(a.status.code(), Some(EXIT_OK));
    assert_eq!(a.stdout, b.stdout);
    let report: Report = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(report.m, Some(3));
    assert_eq!(report.open_questions, vec![OPEN_COMPLEX_M3.to_string()]);
    let again = serde_json::to_string_pretty(&report).unwrap();
    assert_eq!(again, stdout(&a).trim_end());
}

#[test]
fn real_toeplitz_has_no_open_question() {
    let o = cpmap(&["analyze", "zoo:toeplitz2x2", "--field", "real", "--json"]);
    let report: Report = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report.open_questions.is_empty());
    assert!(!report.cp.unwrap().completely_positive);
}

#[test]
fn upper_triangular_target_is_unreachable() {
    let o = cpmap(&["range", "zoo:upper2x2", "--y", "1,0,1"]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert!(stdout(&o).starts_with("not reachable"), "{}", stdout(&o));
    let o = cpmap(&["range", "zoo:upper2x2", "--y", "1,2:1,3"]);
    assert!(stdout(&o).starts_with("reachable"), "{}", stdout(&o));
}

#[test]
fn range_writes_witness_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    let o = cpmap(&["range", "zoo:toeplitz2x2", "--y", "-1,2,0.5", "--emit-witness", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let w: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(w["z"].as_array().unwrap().len(), 2);
    assert_eq!(w["x"].as_array().unwrap().len(), 2);
}

#[test]
fn convert_then_analyze_from_stdin() {
    let o = cpmap(&["convert", "--to", "choi", "zoo:transpose2", "--field", "real"]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let choi = stdout(&o);
    assert!(choi.contains("\"choi\""));
    let o = cpmap_stdin(&["convert", "--to", "matricization", "-"], &choi);
    let mat = stdout(&o);
    assert!(mat.contains("\"matricization\""));
    let o = cpmap_stdin(&["analyze", "-", "--json"], &mat);
    let report: Report = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report.m, Some(4));
    assert!((report.cp.unwrap().min_eigenvalue + 1.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    assert_eq!(cpmap(&["analyze", "zoo:nope"]).status.code(), Some(EXIT_PARSE));
    assert_eq!(cpmap(&["frobnicate"]).status.code(), Some(EXIT_PARSE));
    assert_eq!(cpmap(&["analyze", "zoo:transpose2", "--budget", "0"]).status.code(), Some(EXIT_PARSE));
    assert_eq!(cpmap(&["range", "zoo:upper2x2", "--y", "1,2"]).status.code(), Some(EXIT_PARSE));
    assert_eq!(cpmap_stdin(&["analyze", "-"], "{").status.code(), Some(EXIT_PARSE));

    let not_star = r#"{"n":1,"q":1,"matricization":{"field":"complex","rows":1,"cols":1,"data":[[0,1]]}}"#;
    let o = cpmap_stdin(&["analyze", "-"], not_star);
    assert_eq!(o.status.code(), Some(EXIT_NOT_STAR_LINEAR));
    assert!(stdout(&o).contains("star-linear: no"));
    assert_eq!(cpmap_stdin(&["hill", "-"], not_star).status.code(), Some(EXIT_NOT_STAR_LINEAR));
}

#[test]
fn case2x2_json_matches_library() {
    let o = cpmap(&["case2x2", "--json"]);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows, serde_json::to_value(census()).unwrap());
}

#[test]
fn hill_text_shows_small_integers_cleanly() {
    let o = cpmap(&["hill", "zoo:toeplitz2x2", "--field", "real"]);
    let text = stdout(&o);
    assert!(text.contains("[0, 1, -2]"), "{text}");
}
