//! The `datapoison` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use datapoison::tracefile::read_trace_file;

const POISONED: &str = r#"{
  "ring": {"node_count": 5, "rounds": 10},
  "seed": 4,
  "injections": [
    {"node": 0, "kind": {"poison": {
      "effect": {"intermittent": 0.5}, "lifetime": "always",
      "infectious": true, "deviation": {"kind": "offset", "magnitude": 1}}}}
  ],
  "trace_path": "trace.jsonl"
}"#;

fn datapoison(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_datapoison"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn check_succeeds() {
    let out = datapoison(&["check"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn run_prints_bare_lines_and_summary_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "ref.json",
        r#"{"ring": {"node_count": 5, "k_states": 5, "rounds": 10}}"#,
    );
    let out = datapoison(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 50);
    assert_eq!(lines[0], "1,0,0,0,0");
    assert!(stderr(&out).contains("snapshots: 50"));

    let quiet = datapoison(&["run", "--quiet", "--config", config.to_str().unwrap()]);
    assert!(quiet.stderr.is_empty());
    assert_eq!(quiet.stdout, out.stdout);
}

#[test]
fn trace_path_is_relative_to_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "poisoned.json", POISONED);
    let out = datapoison(&["run", "--quiet", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let record = read_trace_file(&dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(record.seed, 4);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    let traced: Vec<&str> = record.snapshots.iter().map(|s| s.line.as_str()).collect();
    assert_eq!(lines, traced);
    assert!(record.events.iter().any(|e| e.deviated));
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "poisoned.json", POISONED);
    let trace = dir.path().join("seeded.jsonl");
    let out = datapoison(&[
        "run",
        "--quiet",
        "--seed",
        "99",
        "--config",
        config.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let record = read_trace_file(&trace).unwrap();
    assert_eq!(record.seed, 99);
    assert!(!dir.path().join("trace.jsonl").exists());
}

#[test]
fn scenario_errors_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.json",
        r#"{
  "ring": {"node_count": 5, "rounds": 10},
  "injections": [
    {"node": 0, "kind": {"poison": {
      "effect": {"intermittent": 1.0}, "lifetime": "always",
      "infectious": true, "deviation": {"kind": "offset", "magnitude": 1}}}}
  ]
}"#,
    );
    let out = datapoison(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.json:5:"), "{err}");
    assert!(
        err.contains("injections[0].kind.poison.effect.intermittent"),
        "{err}"
    );
    assert!(out.stdout.is_empty());
}

#[test]
fn small_k_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "k.json",
        r#"{"ring": {"node_count": 5, "k_states": 3, "rounds": 10}}"#,
    );
    let out = datapoison(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("K must exceed N"));
}

#[test]
fn overflow_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    // the poisoned guard fires on a clean mismatch, then the offset overflows
    let config = write(
        dir.path(),
        "overflow.json",
        r#"{"ring": {"node_count": 3, "rounds": 4}, "injections": [
            {"node": 2, "kind": {"perturb": {"new_status": 1}}},
            {"node": 0, "kind": {"poison": {
              "effect": "deterministic", "lifetime": "always", "infectious": true,
              "deviation": {"kind": "offset", "magnitude": 9223372036854775807}}}}]}"#,
    );
    let out = datapoison(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("overflow"), "{}", stderr(&out));
}

#[test]
fn sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "poisoned.json", POISONED);
    let config = config.to_str().unwrap();
    let out = datapoison(&[
        "sweep", "--config", config, "--param", "rate", "--values", "0.1,0.5", "--reps", "20",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = table
        .lines()
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "value");
    assert_eq!((rows[1][0], rows[1][1]), ("0.1", "20"));
    assert_eq!((rows[2][0], rows[2][1]), ("0.5", "20"));
    let rate = |row: &[&str]| row.last().unwrap().parse::<f64>().unwrap();
    assert!(rate(&rows[1]) < rate(&rows[2]));

    let empty = datapoison(&[
        "sweep", "--config", config, "--param", "rate", "--values", "",
    ]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(stderr(&empty).contains("no values"));

    let unknown = datapoison(&["sweep", "--config", config, "--param", "k", "--values", "1"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).contains("--param"));
}

#[test]
fn bundled_scenario_runs() {
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/poisoned.json");
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bundled.jsonl");
    let out = datapoison(&[
        "run",
        "--config",
        bundled.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(trace.exists());
}
