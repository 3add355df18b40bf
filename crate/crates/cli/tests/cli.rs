use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn ctm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctm")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn verify_safe_scan() {
    let out = ctm(&["verify", &corpus("safe_scan.ctm")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("verdict: SafeForAllSizes"));
}

#[test]
fn verify_off_by_one_json() {
    let out = ctm(&["verify", &corpus("off_by_one.ctm"), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out);
    assert_eq!(doc["schemaVersion"], 1);
    assert_eq!(doc["verdict"], "Unsafe");
    assert_eq!(doc["witnesses"][0]["size"], 1);
    assert_eq!(doc["witnesses"][0]["kind"], "overflow");
    assert_eq!(doc["witnesses"][0]["counters"]["i"], 0);
    assert_eq!(doc["perAccess"][0]["minUnsafe"], 1);
    assert_eq!(doc["perAccess"][0]["unsafeSet"]["periodBits"], "1");
}

#[test]
fn malformed_input_exits_two_with_location() {
    let out = ctm(&["verify", &corpus("invalid/malformed.ctm")]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("malformed.ctm:5:1: error[UnexpectedToken]"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn fragment_errors_exit_two() {
    for name in ["invalid/negative_length.ctm", "invalid/content_guard.ctm"] {
        let out = ctm(&["threshold", &corpus(name), "--json"]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(stderr(&out).contains("error["), "{name}");
    }
}

#[test]
fn unreadable_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ctm");
    let out = ctm(&["verify", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn human_output_has_replay_line() {
    let file = corpus("late_overflow.ctm");
    let out = ctm(&["verify", &file]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("replay: ")).expect("replay line");
    assert_eq!(line, format!("replay: ctm check {file} --max-n 6"));
    let replay: Vec<&str> = line["replay: ctm ".len()..].split(' ').collect();
    assert_eq!(ctm(&replay).status.code(), Some(1));
}

#[test]
fn check_below_the_first_bug_is_clean() {
    let out = ctm(&["check", &corpus("late_overflow.ctm"), "--max-n", "5", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["verdict"], "SafeUpTo");
    assert_eq!(doc["stats"]["sizesChecked"], serde_json::json!([0, 5]));
    assert_eq!(doc["programCT"], Value::Null);
}

#[test]
fn check_all_reports_every_unsafe_size() {
    let out = ctm(&["check", &corpus("late_overflow.ctm"), "--max-n", "20", "--all", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let sizes: Vec<u64> = json(&out)["witnesses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w["size"].as_u64().unwrap())
        .collect();
    assert_eq!(sizes, vec![6, 7, 8, 9, 10]);
}

#[test]
fn threshold_strategies_report_the_same_sets() {
    let file = corpus("large_threshold.ctm");
    let e = json(&ctm(&["threshold", &file, "--json"]));
    let x = json(&ctm(&["threshold", &file, "--strategy", "extremal", "--json"]));
    assert_eq!(e["perAccess"][0]["unsafeSet"], x["perAccess"][0]["unsafeSet"]);
    assert_eq!(e["perAccess"][0]["minUnsafe"], 102);
    assert_eq!(x["perAccess"][0]["method"], "extremal");
    assert_eq!(e["verdict"], "Unsafe");
}

#[test]
fn crossval_clean_on_periodic_program() {
    let out = ctm(&["crossval", &corpus("periodic_stride4.ctm"), "--sweep-max", "200", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["verdict"], "Clean");
    assert_eq!(doc["crossval"]["discrepancies"], serde_json::json!([]));
}

#[test]
fn budget_exhaustion_exits_three() {
    let out = ctm(&["verify", &corpus("large_threshold.ctm"), "--budget", "100", "--json"]);
    assert_eq!(out.status.code(), Some(3));
    let doc = json(&out);
    assert_eq!(doc["verdict"], "Inconclusive");
    assert!(doc["reason"].as_str().unwrap().contains("budget"));
}

#[test]
fn disjunct_cap_exits_three() {
    let out = ctm(&["threshold", &corpus("periodic_mod3.ctm"), "--max-disjuncts", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn json_keys_are_sorted() {
    let out = ctm(&["verify", &corpus("periodic_even.ctm"), "--json"]);
    let text = stdout(&out);
    let top: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \"") && !l.starts_with("   "))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
    assert!(top.contains(&"schemaVersion"));
}
