use std::process::{Command, Output};

use serde_json::Value;

mod common;

fn srsearch(data_dir: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srsearch"))
        .args(args)
        .env("SRSEARCH_DATA_DIR", data_dir)
        .env_remove("SRSEARCH_NER_URL")
        .env_remove("SRSEARCH_MLM_URL")
        .env_remove("SRSEARCH_EMBEDDING_URL")
        .output()
        .unwrap()
}

fn path(rel: &str) -> String {
    common::fixture(rel).display().to_string()
}

fn golden_search(data_dir: &std::path::Path, extra: &[&str]) -> Output {
    let config = path("golden/srsearch.toml");
    let sentinels = path("golden/sentinels.json");
    let corpus = path("golden/corpus.jsonl");
    let mut args = vec![
        "search",
        "--config",
        &config,
        "--query",
        common::GOLDEN_QUERY,
        "--sentinel-file",
        &sentinels,
        "--corpus",
        &corpus,
    ];
    args.extend_from_slice(extra);
    srsearch(data_dir, &args)
}

#[test]
fn search_prints_golden_key_first() {
    let dir = tempfile::tempdir().unwrap();
    let out = golden_search(dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), common::GOLDEN_KEY);
    assert_eq!(lines.count(), 5);
    assert!(dir.path().join("sessions.jsonl").exists());
}

#[test]
fn search_json_is_deterministic_apart_from_ids() {
    let dir = tempfile::tempdir().unwrap();
    let run = || -> Value {
        let out = golden_search(dir.path(), &["--json"]);
        assert!(out.status.success());
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a["rendered_query"], common::GOLDEN_KEY);
    assert_eq!(a["rendered_query"], b["rendered_query"]);
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["trace"], b["trace"]);
    assert_ne!(a["query_id"], b["query_id"]);
    assert_eq!(a["results"].as_array().unwrap().len(), 5);
}

#[test]
fn eval_reports_eighty_percent() {
    let dir = tempfile::tempdir().unwrap();
    let sessions = path("golden/sessions.jsonl");
    let judgments = path("golden/judgments.jsonl");
    let out = srsearch(dir.path(), &["eval", "--requests", &sessions, "--judgments", &judgments]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["overall"], 80.0);
    assert_eq!(report["per_query"]["golden"]["relevant"], 4);
    assert_eq!(report["per_query"]["golden"]["judged"], 5);

    let out = srsearch(
        dir.path(),
        &["eval", "--requests", &sessions, "--judgments", &judgments, "--query-id", "other"],
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["empty"], true);
}

#[test]
fn ingest_rejects_dangling_edge() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("g.jsonl").display().to_string();
    let out = srsearch(dir.path(), &["ingest-kg", &path("dangling.jsonl"), "--out", &out_file]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "DanglingEdge");
    assert_eq!(err["target"], "Z");
    assert!(!dir.path().join("g.jsonl").exists());
}

#[test]
fn ingest_round_trip_keeps_version() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.jsonl").display().to_string();
    let second = dir.path().join("b.jsonl").display().to_string();
    let run = |input: &str, out: &str| -> Value {
        let o = srsearch(dir.path(), &["ingest-kg", input, "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let a = run(&path("mesh-mini.jsonl"), &first);
    let b = run(&first, &second);
    assert_eq!(a["graph_version"].as_str().unwrap().len(), 64);
    assert_eq!(a["graph_version"], b["graph_version"]);
    assert_eq!(a["concepts"], b["concepts"]);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn validation_failure_is_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = srsearch(
        dir.path(),
        &["search", "--config", &path("golden/srsearch.toml"), "--query", "x", "--k", "0"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "Validation");
    assert_eq!(err["field"], "k");
}
