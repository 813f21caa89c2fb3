use std::sync::Arc;

use axum::http::StatusCode as AxStatus;
use axum::routing::get;
use axum::Router;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};
use srsearch::config::Config;
use srsearch::feedback::Category;
use srsearch::service::{http, Deps};

mod common;

struct Api {
    base: String,
    client: Client,
    _dir: tempfile::TempDir,
}

impl Api {
    fn start(configure: impl FnOnce(&mut Config)) -> Api {
        let dir = tempfile::tempdir().unwrap();
        let mut config = common::golden_config(dir.path());
        configure(&mut config);
        let deps = Deps::from_config(config).unwrap();
        Api {
            base: common::spawn_stub(http::router(Arc::new(deps))),
            client: Client::new(),
            _dir: dir,
        }
    }

    fn post(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(body).send().unwrap();
        let status = r.status();
        let text = r.text().unwrap();
        (status, if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap() })
    }

    fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().unwrap();
        (r.status(), r.json().unwrap())
    }
}

fn golden_body() -> Value {
    serde_json::to_value(common::golden_request()).unwrap()
}

fn judgment(query_id: &str, article_id: &str, relevant: bool) -> Value {
    let categories: serde_json::Map<String, Value> = Category::ALL
        .iter()
        .map(|c| (serde_json::to_value(c).unwrap().as_str().unwrap().to_string(), json!(relevant)))
        .collect();
    json!({
        "query_id": query_id,
        "article_id": article_id,
        "relevant": relevant,
        "categories": categories,
        "missing_concepts": "",
        "ts": "2024-05-01T12:00:00Z",
    })
}

#[test]
fn search_feedback_metrics_flow() {
    let api = Api::start(|_| {});
    let (status, resp) = api.post("/api/search", &golden_body());
    assert_eq!(status, StatusCode::OK, "{resp}");
    assert_eq!(resp["rendered_query"], common::GOLDEN_KEY);
    let results = resp["results"].as_array().unwrap();
    assert_eq!(results.len(), 5);
    for stage in ["extract", "merge", "expand", "build", "retrieve", "rerank", "persist", "total"] {
        assert!(resp["timing"][stage].is_number(), "{stage}");
    }
    let qid = resp["query_id"].as_str().unwrap();

    let (status, session) = api.get(&format!("/api/session/{qid}"));
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["rendered_query"], common::GOLDEN_KEY);
    assert_eq!(session["ranked_article_ids"].as_array().unwrap().len(), 5);
    assert_eq!(session["results"].as_array().unwrap().len(), 5);

    let ids: Vec<&str> = results.iter().map(|r| r["article"]["pmid"].as_str().unwrap()).collect();
    for (i, id) in ids.iter().enumerate() {
        let (status, _) = api.post("/api/feedback", &judgment(qid, id, i != 2));
        assert_eq!(status, StatusCode::NO_CONTENT);
    }
    let (_, m) = api.get("/api/metrics");
    assert_eq!(m["overall"], 80.0);
    assert_eq!(m["empty"], false);
    assert_eq!(m["per_query"][qid]["ratio"], 80.0);
    assert_eq!(m["judged_coverage"], 100.0);
    let (_, m) = api.get(&format!("/api/metrics?query_id={qid}"));
    assert_eq!(m["overall"], 80.0);

    // Resubmitting flips the judgment; the session view shows the latest.
    api.post("/api/feedback", &judgment(qid, ids[2], true));
    let (_, session) = api.get(&format!("/api/session/{qid}"));
    let fb = session["feedback"].as_array().unwrap();
    assert_eq!(fb.len(), 5);
    assert!(fb.iter().all(|f| f["relevant"] == true));
    assert_eq!(api.get("/api/metrics").1["overall"], 100.0);
}

#[test]
fn empty_metrics_are_flagged() {
    let api = Api::start(|_| {});
    let (status, m) = api.get("/api/metrics");
    assert_eq!(status, StatusCode::OK);
    assert_eq!(m["overall"], 0.0);
    assert_eq!(m["empty"], true);
}

#[test]
fn error_statuses() {
    let api = Api::start(|_| {});
    let (status, body) = api.post("/api/feedback", &judgment("no-such-query", "1", true));
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");

    let (status, body) = api.post("/api/search", &json!({"query": "   "}));
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "query");

    let (status, body) = api.post("/api/search", &json!({"query": "x", "k": 0}));
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "k");

    let (status, _) = api.post("/api/search", &json!({"qury": "x"}));
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let mut partial = judgment("q", "1", true);
    partial["categories"].as_object_mut().unwrap().remove("Other");
    assert_eq!(api.post("/api/feedback", &partial).0, StatusCode::BAD_REQUEST);

    let (status, _) = api.get("/api/session/nope");
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, body) = api.post(
        "/api/search",
        &json!({"query": "catgut", "backend": {"LOCAL": "/definitely/missing.jsonl"}}),
    );
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["stage"], "retrieve");
}

#[test]
fn backend_outage_is_bad_gateway_with_stage() {
    let entrez = common::spawn_stub(Router::new().route("/esearch.fcgi", get(|| async { AxStatus::SERVICE_UNAVAILABLE })));
    let api = Api::start(|c| {
        c.entrez.base_url = entrez;
        c.entrez.backoff_ms = 1;
        c.entrez.requests_per_second = 0.0;
    });
    let mut body = golden_body();
    body["backend"] = json!("REMOTE");
    let (status, resp) = api.post("/api/search", &body);
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(resp["stage"], "retrieve");
    assert_eq!(resp["error"], "backend");
}

#[test]
fn health_reflects_provider_config() {
    let api = Api::start(|c| c.mask_table = None);
    let (status, h) = api.get("/api/health");
    assert_eq!(status, StatusCode::OK);
    assert_eq!(h["status"], "ok");
    for p in ["ner", "mlm", "embedding"] {
        assert_eq!(h["providers"][p], "fallback", "{p}");
    }
    assert_eq!(h["graph_version"].as_str().unwrap().len(), 64);

    let recorded = Api::start(|_| {});
    assert_eq!(recorded.get("/api/health").1["providers"]["mlm"], "recorded");
}

#[test]
fn concurrent_searches_are_isolated() {
    let api = Arc::new(Api::start(|_| {}));
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let api = api.clone();
            std::thread::spawn(move || api.post("/api/search", &golden_body()).1)
        })
        .collect();
    let responses: Vec<Value> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    let ids: std::collections::HashSet<_> = responses.iter().map(|r| r["query_id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids.len(), 6);
    for r in &responses {
        assert_eq!(r["rendered_query"], common::GOLDEN_KEY);
        assert_eq!(r["results"], responses[0]["results"]);
    }
}
