use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sxq_core::response::{run_query, QueryRequest};
use sxq_core::scorer::{LexicalScorer, ReplayEmbedder, ReplayNli, ScorerSpec};
use sxq_core::tree::{load_memory, to_document_value, MemoryTree};
use sxq_service::replay_server::replay_router;
use sxq_service::{read_journal, replay, router, AppState, Journal};
use tower::ServiceExt;

const Q1: &str = r#"//Day[avg(/POI[node ~= "conference"])]"#;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn acl() -> MemoryTree {
    load_memory(&std::fs::read_to_string(fixtures().join("acl_trip.json")).unwrap()).unwrap()
}

fn mutation(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixtures().join("mutations").join(name)).unwrap()).unwrap()
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn app() -> axum::Router {
    router(Arc::new(AppState::new(acl(), None)))
}

#[tokio::test]
async fn read_endpoints() {
    let app = app();
    let (s, memory) = call_json(&app, "GET", "/memory", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(memory, to_document_value(&acl()));

    let (_, schema) = call_json(&app, "GET", "/schema", None).await;
    assert_eq!(schema["nodeTypes"], json!(["Itinerary", "Version", "Day", "POI"]));

    let (_, versions) = call_json(&app, "GET", "/versions", None).await;
    assert_eq!(versions, json!([{"id": "v1", "summary": "initial plan"}]));

    let (s, health) = call_json(&app, "GET", "/healthz", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(health["status"], "ok");
}

#[tokio::test]
async fn query_matches_library_output_byte_for_byte() {
    let app = app();
    let body = json!({"query": Q1, "scorer": {"kind": "lexical"}, "topK": 1, "includeTrace": true});
    let (s, bytes) = call(&app, "POST", "/query", Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let request: QueryRequest = serde_json::from_value(body).unwrap();
    let direct = run_query(&acl(), &request, &LexicalScorer).unwrap();
    assert_eq!(bytes, serde_json::to_vec(&direct).unwrap());
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["topId"], "day-2");
    assert_eq!(v["trace"]["steps"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn query_errors_map_to_statuses() {
    let app = app();
    let (s, v) = call_json(&app, "POST", "/query", Some(json!({"query": "//Day[avg("}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["offset"], 10);
    assert_eq!(v["error"], "syntax");

    let (s, _) = call_json(&app, "POST", "/query", Some(json!({"query": "//Day", "topK": 0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, _) = call_json(
        &app,
        "POST",
        "/query",
        Some(json!({"query": "//Day", "scorer": {"kind": "magic"}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let bad_scorer = json!({"query": Q1, "scorer": {"kind": "embedding", "endpoint": "http://127.0.0.1:1/embed", "model": "m"}});
    let (s, v) = call_json(&app, "POST", "/query", Some(bad_scorer)).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"], "scorer-transport");
}

#[tokio::test]
async fn mutate_appends_version_and_journals() {
    let dir = tempfile::tempdir().unwrap();
    let journal_path = dir.path().join("journal.jsonl");
    let state = Arc::new(AppState::new(acl(), Some(Journal::open(&journal_path).unwrap())));
    let app = router(state.clone());

    let (s, v) = call_json(
        &app,
        "POST",
        "/mutate",
        Some(json!({"spec": mutation("coffee_break.json"), "summary": "add coffee break"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["version"], "v2");
    let (s, _) = call_json(
        &app,
        "POST",
        "/mutate",
        Some(json!({"spec": mutation("delete_poster.json"), "summary": "delete poster session"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);

    let (_, versions) = call_json(&app, "GET", "/versions", None).await;
    assert_eq!(versions.as_array().unwrap().len(), 3);
    assert_eq!(versions[2]["summary"], "delete poster session");

    let entries = read_journal(&journal_path).unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(replay(acl(), &entries).unwrap(), *state.snapshot());

    // a restarted service picks the journal back up
    let memory_file = fixtures().join("acl_trip.json");
    let restarted = AppState::load(&memory_file, Some(&journal_path)).unwrap();
    assert_eq!(*restarted.snapshot(), *state.snapshot());
}

#[tokio::test]
async fn rejected_mutations_leave_memory_alone() {
    let dir = tempfile::tempdir().unwrap();
    let journal_path = dir.path().join("journal.jsonl");
    let state = Arc::new(AppState::new(acl(), Some(Journal::open(&journal_path).unwrap())));
    let app = router(state.clone());
    let bad_type = json!({
        "spec": {"source": "v1", "op": "insert", "parent": "day-2", "node": {"type": "Day", "attributes": {}}},
        "summary": "nested day"
    });
    let (s, v) = call_json(&app, "POST", "/mutate", Some(bad_type)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["violations"][0]["rule"], "childNotAllowed");

    let unknown = json!({"spec": {"source": "v7", "op": "noop"}, "summary": "x"});
    let (s, _) = call_json(&app, "POST", "/mutate", Some(unknown)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, _) = call(&app, "POST", "/mutate", Some(json!({"summary": "no spec"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    assert_eq!(*state.snapshot(), acl());
    assert!(read_journal(&journal_path).unwrap().is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn queries_never_see_a_torn_tree() {
    let state = Arc::new(AppState::new(acl(), None));
    let app = router(state.clone());
    let mut tasks = Vec::new();
    for i in 0..40 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            if i % 4 == 0 {
                let (s, _) = call(
                    &app,
                    "POST",
                    "/mutate",
                    Some(json!({"spec": {"source": "latest", "op": "noop"}, "summary": format!("copy {i}")})),
                )
                .await;
                assert_eq!(s, StatusCode::OK);
            } else {
                // every version is a full copy, so Day counts are whole multiples
                let (s, v) = call_json(&app, "POST", "/query", Some(json!({"query": "//Day", "topK": 1000}))).await;
                assert_eq!(s, StatusCode::OK);
                assert_eq!(v["results"].as_array().unwrap().len() % 3, 0);
            }
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
    assert_eq!(state.versions().len(), 11);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn http_scorer_clients_against_replay_server() {
    let embeddings = ReplayEmbedder::from_file(
        fixtures().join("scorer_replays/acl_embeddings.json").to_str().unwrap(),
    )
    .unwrap();
    let nli = ReplayNli::from_file(fixtures().join("scorer_replays/acl_nli.json").to_str().unwrap()).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, replay_router(embeddings, nli)).await.unwrap() });

    let state = Arc::new(AppState::new(acl(), None));
    let app = router(state);
    let embed = ScorerSpec::embedding(format!("http://{addr}/embed"), "replay-embed-acl");
    let (s, v) = call_json(
        &app,
        "POST",
        "/query",
        Some(json!({"query": Q1, "scorer": embed, "topK": 3})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["topId"], "day-2");
    assert!((v["results"][0]["weight"].as_f64().unwrap() - 0.565).abs() <= 5e-4);

    let nli = ScorerSpec::entailment(format!("http://{addr}/nli"), "replay-nli-acl");
    let (s, v) = call_json(&app, "POST", "/query", Some(json!({"query": Q1, "scorer": nli}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["topId"], "day-2");
    let w = v["results"][0]["weight"].as_f64().unwrap();
    assert!((w - (0.93 + 0.88 + 0.91) / 3.0).abs() < 1e-12);

    // unrecorded text: the server answers 404, surfaced as a gateway error
    let (s, _) = call_json(
        &app,
        "POST",
        "/query",
        Some(json!({"query": r#"//Day[node ~= "never recorded"]"#, "scorer": embed})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
}
