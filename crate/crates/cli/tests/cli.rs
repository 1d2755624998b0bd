use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-atlas"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).env_remove("CAUSAL_ATLAS_TIMESTAMP").output().expect("spawn")
}

fn simulate(dir: &Path, scenario: &str, seed: &str) {
    std::fs::write(dir.join("sc.json"), scenario).unwrap();
    let out = run(dir, &["simulate", "--scenario", "sc.json", "--seed", seed, "--out-dir", "sim"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_dataset_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), r#"{"kind": "tabular", "n_nodes": 6, "n_samples": 300}"#, "4");
    let csv = std::fs::read_to_string(tmp.path().join("sim/dataset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 301);
    let truth: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("sim/truth.json")).unwrap()).unwrap();
    assert_eq!(truth["nodes"].as_array().unwrap().len(), 6);
}

#[test]
fn pipeline_is_reproducible_with_fixed_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), r#"{"kind": "tabular", "n_nodes": 5, "n_samples": 400}"#, "2");
    let args = ["pipeline", "--data", "sim/dataset.csv", "--seed", "7", "--bootstrap", "8", "--timestamp", "2024-01-01T00:00:00Z"];
    let a = run(tmp.path(), &args);
    let b = run(tmp.path(), &args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let md = String::from_utf8(a.stdout).unwrap();
    assert!(md.contains("## Algorithm selection"));
    assert!(md.contains("2024-01-01T00:00:00Z"));
}

#[test]
fn pipeline_out_dir_holds_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), r#"{"kind": "time_series", "n_nodes": 3, "n_steps": 400, "max_lag": 2}"#, "1");
    let out = run(tmp.path(), &["pipeline", "--data", "sim/dataset.csv", "--bootstrap", "5", "--format", "json", "--out-dir", "res"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["profile.json", "trace.json", "graph.json", "confidence.json", "report.json"] {
        assert!(tmp.path().join("res").join(f).exists(), "{f} missing");
    }
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("res/report.json")).unwrap()).unwrap();
    assert_eq!(doc["profile"]["data_kind"], "time_series");
}

#[test]
fn constraints_are_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), r#"{"kind": "tabular", "n_nodes": 4, "n_samples": 400}"#, "3");
    std::fs::write(tmp.path().join("c.json"), r#"{"required": [["X0", "X3"]], "forbidden_as_effect": ["X1"]}"#).unwrap();
    let out = run(tmp.path(), &["pipeline", "--data", "sim/dataset.csv", "--bootstrap", "5", "--constraints", "c.json", "--out-dir", "res"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("res/graph.json")).unwrap()).unwrap();
    let edges = g["edges"].as_array().unwrap();
    assert!(edges.iter().any(|e| e["from"] == "X0" && e["to"] == "X3"));
    assert!(edges.iter().all(|e| e["to"] != "X1"));
}

#[test]
fn discover_and_select_emit_json() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), r#"{"kind": "tabular", "n_nodes": 4, "n_samples": 300}"#, "5");
    let out = run(tmp.path(), &["discover", "--data", "sim/dataset.csv", "--algorithm", "pc"]);
    assert_eq!(out.status.code(), Some(0));
    let g: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(g["nodes"].as_array().unwrap().len(), 4);
    let out = run(tmp.path(), &["select", "--data", "sim/dataset.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let t: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(t["chosen"].is_string());
}

#[test]
fn bench_writes_records_aggregates_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["bench", "--suite", "tabular_default", "--algorithms", "pc,iamb_cpdag", "--seeds", "2", "--timestamp", "T", "--out-dir", "b"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let jsonl = std::fs::read_to_string(tmp.path().join("b/records.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 4);
    let csv = std::fs::read_to_string(tmp.path().join("b/aggregates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(tmp.path().join("b/report.md").exists());
}

#[test]
fn exit_codes_separate_usage_data_and_runtime_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(run(d, &["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(d, &["pipeline", "--data", "absent.csv"]).status.code(), Some(3));
    std::fs::write(d.join("ragged.csv"), "a,b\n1,2\n3\n").unwrap();
    assert_eq!(run(d, &["diagnose", "--data", "ragged.csv"]).status.code(), Some(3));
    std::fs::write(d.join("const.csv"), "a,b\n1,2\n1,2\n1,2\n").unwrap();
    assert_eq!(run(d, &["pipeline", "--data", "const.csv"]).status.code(), Some(3));
    std::fs::write(d.join("ok.csv"), "a,b\n1,2\n2,1\n3,5\n4,4\n").unwrap();
    assert_eq!(run(d, &["discover", "--data", "ok.csv", "--algorithm", "magic"]).status.code(), Some(2));
    assert_eq!(run(d, &["pipeline", "--data", "ok.csv", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(run(d, &["bench", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn unreachable_advisor_does_not_fail_selection() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), r#"{"kind": "tabular", "n_nodes": 4, "n_samples": 300}"#, "6");
    let plain = run(tmp.path(), &["select", "--data", "sim/dataset.csv"]);
    let advised = run(tmp.path(), &["select", "--data", "sim/dataset.csv", "--advisor-endpoint", "http://127.0.0.1:9/advise"]);
    assert_eq!(advised.status.code(), Some(0));
    assert_eq!(plain.stdout, advised.stdout);
}
