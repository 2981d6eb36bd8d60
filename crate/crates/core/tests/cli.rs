mod common;

use std::path::Path;

use hatewatch::cli::run;
use hatewatch::metrics::{read_events_jsonl, summarize_logs, LogSummary};
use hatewatch::service::Accounts;
use serde_json::Value;

use common::fixture;

fn hw(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hatewatch").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = hw(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ingested() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store").to_str().unwrap().to_string();
    let src = fixture("ingest_10.jsonl");
    ok(&["--store", &store, "ingest", "--source", s(&src)]);
    (dir, store)
}

#[test]
fn usage_errors_exit_2() {
    let (code, _, err) = hw(&["suggest", "--bogus"]);
    assert_eq!(code, 2);
    assert!(err.contains("--bogus"));
    let (code, _, _) = hw(&["frobnicate"]);
    assert_eq!(code, 2);
    let (code, out, _) = hw(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("ingest"));
}

#[test]
fn runtime_errors_exit_1() {
    let (code, _, err) = hw(&["trends", "recent"]);
    assert_eq!(code, 1);
    assert!(err.contains("--store"));
    let (code, _, err) = hw(&["suggest", "--index", "/nonexistent/idx", "--text", "x"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
}

#[test]
fn ingest_reports_kind_counts_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let src = fixture("ingest_10.jsonl");
    let wl = fixture("watchlist_en.json");
    let out = ok(&["--store", s(&store), "--json", "ingest", "--source", s(&src), "--watchlist", s(&wl)]);
    let stats: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(stats["languages"]["en"]["original"], 2);
    assert_eq!(stats["languages"]["en"]["replies"], 1);
    assert_eq!(stats["languages"]["en"]["retweets"], 3);
    assert_eq!(stats["rejected_no_match"], 4);
    assert_eq!(stats["stored"], 6);
    let again: Value =
        serde_json::from_str(&ok(&["--store", s(&store), "--json", "ingest", "--source", s(&src)])).unwrap();
    assert_eq!(again["stored"], 0);
    assert_eq!(again["duplicates"], 6);
    let table = ok(&["--store", s(&store), "ingest", "--source", s(&src)]);
    assert!(table.starts_with("language  original"));
}

#[test]
fn index_then_suggest_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("en.idx");
    let pairs = fixture("sample_pairs.csv");
    ok(&["index", "build", "--pairs", s(&pairs), "--lang", "en", "--out", s(&idx)]);
    let args = ["suggest", "--index", s(&idx), "--text", "Every Muslim is a potential terrorist", "--k", "4"];
    let first = ok(&args);
    assert_eq!(first, ok(&args));
    let list: Vec<Value> = serde_json::from_str(&first).unwrap();
    assert_eq!(list.len(), 4);
    assert_eq!(list[0]["rank"], 1);
    assert!(list.iter().all(|s| s["counter_text"].is_string() && s["score"].is_f64()));
    let (code, _, err) = hw(&["suggest", "--index", s(&idx), "--text", "x", "--lang", "fr"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn index_build_merges_store_pairs() {
    let (dir, store) = ingested();
    let idx = dir.path().join("it.idx");
    let (code, _, err) = hw(&["--store", &store, "index", "build", "--lang", "it", "--out", s(&idx)]);
    assert_eq!(code, 1);
    assert!(err.contains("no pairs"), "{err}");
    let pairs = fixture("sample_pairs.csv");
    let out = ok(&["--store", &store, "--json", "index", "build", "--pairs", s(&pairs), "--lang", "it", "--out", s(&idx)]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["source_version"], 0);
    assert_eq!(v["documents"], 5);
}

#[test]
fn report_matches_metrics_module() {
    let dir = tempfile::tempdir().unwrap();
    let logs = fixture("activity_log.jsonl");
    let outdir = dir.path().join("report");
    let out = ok(&["report", "--logs", s(&logs), "--out", s(&outdir)]);
    let got: LogSummary = serde_json::from_str(&out).unwrap();
    let events = read_events_jsonl(&std::fs::read_to_string(&logs).unwrap()).unwrap();
    let expected = summarize_logs(&events, &[]).unwrap();
    assert_eq!(got, expected);
    assert_eq!(got.modified_count, 1);
    assert_eq!(got.new_count, 1);
    assert_eq!(got.mean_minutes_modified, Some(4.0));
    assert_eq!(got.mean_minutes_new, Some(10.0));
    let written: LogSummary = serde_json::from_str(&std::fs::read_to_string(outdir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(written, expected);
    let csv = std::fs::read_to_string(outdir.join("sessions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    // with an index the relevance means appear
    let idx = dir.path().join("en.idx");
    ok(&["index", "build", "--pairs", s(&fixture("sample_pairs.csv")), "--lang", "en", "--out", s(&idx)]);
    let with_index: LogSummary = serde_json::from_str(&ok(&["report", "--logs", s(&logs), "--index", s(&idx)])).unwrap();
    assert!(with_index.mean_cosine_modified.is_some());
    assert!(with_index.mean_cosine_discarded.is_some());
}

#[test]
fn trends_and_networks_render() {
    let (_dir, store) = ingested();
    let csv = ok(&["--store", &store, "trends", "peaks", "--term", "#banislam", "--from", "2019-03-01", "--to", "2019-03-05", "--csv"]);
    assert_eq!(
        csv,
        "date,count,is_peak\n2019-03-01,2,false\n2019-03-02,2,false\n2019-03-03,2,false\n2019-03-04,0,false\n2019-03-05,0,false\n"
    );
    let recent: Value = serde_json::from_str(&ok(&[
        "--store", &store, "--json", "trends", "recent", "--now", "2019-03-10T00:00:00Z",
    ]))
    .unwrap();
    assert_eq!(recent[0]["term"], "banislam");
    assert_eq!(recent[1]["term"], "stopislam");

    let popular: Value =
        serde_json::from_str(&ok(&["--store", &store, "--json", "trends", "popular", "--term", "banislam", "--k", "1"])).unwrap();
    assert_eq!(popular[0]["id"], "1001");

    let graphml = ok(&["--store", &store, "network", "hashtags", "--term", "banislam", "--format", "graphml"]);
    assert!(graphml.starts_with("<?xml"));
    assert!(graphml.contains("stopislam"));
    let a = ok(&["--store", &store, "--seed", "7", "network", "users"]);
    assert_eq!(a, ok(&["--store", &store, "--seed", "7", "network", "users"]));
    let users: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(users["edges"].as_array().unwrap().len(), 4);

    let top: Value = serde_json::from_str(&ok(&["--store", &store, "--json", "network", "top-users", "--k", "1"])).unwrap();
    assert_eq!(top[0]["user"], "alpha");
}

#[test]
fn ueq_scores_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ueq.csv");
    let header: Vec<String> = (1..=26).map(|i| format!("i{i}")).collect();
    let mut data = format!("respondent,{}\n", header.join(","));
    for r in 0..3 {
        data += &format!("r{r},{}\n", vec!["4"; 26].join(","));
    }
    std::fs::write(&path, data).unwrap();
    let bench = fixture("ueq_benchmark.example.json");
    let out = ok(&["--json", "ueq", "--responses", s(&path), "--seven-point", "--benchmark", s(&bench)]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["n_kept"], 3);
    assert_eq!(v["result"]["scales"]["novelty"]["mean"], 0.0);
    assert_eq!(v["benchmark"]["novelty"], "bad");
    assert_eq!(v["benchmark"]["attractiveness"], "bad");
    let (code, _, _) = hw(&["ueq", "--responses", s(&path)]);
    assert_eq!(code, 1, "4 is outside -3..3 without --seven-point");
}

#[test]
fn account_add_provisions_login() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    ok(&["--store", s(&store), "account", "add", "--operator", "op9", "--secret", "correct horse"]);
    let accounts = Accounts::load(&store).unwrap();
    assert!(accounts.verify("op9", "correct horse"));
    assert!(!accounts.verify("op9", "wrong"));
}

#[test]
fn binary_uses_same_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hatewatch");
    let status = std::process::Command::new(bin).arg("--nope").output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    let out = std::process::Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
