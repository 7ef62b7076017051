use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cpbench::agent::{ScriptFixture, ScriptRule, ScriptedClient, ScriptedReply};
use cpbench::corpus::{load_corpus, Corpus};
use cpbench::experiments::ModelRegistry;
use cpbench::judge::Judge;
use cpbench_server::{router, AppState, Session, SessionStatus, SessionStore};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus() -> Corpus {
    load_corpus(&workspace().join("corpus")).unwrap()
}

fn fenced(code: &str) -> ScriptedReply {
    ScriptedReply::Text(format!("Attempt:\n\n```C++\n{code}\n```\n"))
}

fn reference(corpus: &Corpus, id: &str) -> String {
    corpus.get(id).unwrap().reference_code.clone()
}

const WRONG: &str = "#include <cstdio>\nint main() { printf(\"0\\n\"); }";

fn rule(all: &[&str], responses: Vec<ScriptedReply>) -> ScriptRule {
    ScriptRule {
        name: all.join("|"),
        all: all.iter().map(|s| s.to_string()).collect(),
        any: vec![],
        none: vec![],
        regex: None,
        responses,
    }
}

/// "tutor" answers Toll Road correctly, answers Orchard Walk correctly only
/// after the hint about trees, and is wrong everywhere else. "down" always
/// times out.
fn models(corpus: &Corpus) -> ModelRegistry {
    let tutor = ScriptedClient::new(ScriptFixture {
        model: "tutor".into(),
        rules: vec![
            rule(&["# Toll Road Receipts\n"], vec![fenced(&reference(corpus, "toll-road"))]),
            rule(
                &["# Orchard Walk\n", "think about the trees"],
                vec![fenced(&reference(corpus, "orchard-walk"))],
            ),
        ],
        default: Some(format!("Guessing.\n\n```C++\n{WRONG}\n```\n")),
    })
    .unwrap();
    let down = ScriptedClient::new(ScriptFixture {
        model: "down".into(),
        rules: vec![rule(
            &[""],
            vec![ScriptedReply::Error {
                error: "timeout".into(),
            }],
        )],
        default: None,
    })
    .unwrap();
    let mut reg = ModelRegistry::new();
    reg.insert("tutor", Arc::new(tutor));
    reg.insert("down", Arc::new(down));
    reg
}

fn app_with(store: SessionStore, token: Option<&str>) -> Router {
    let corpus = corpus();
    let models = models(&corpus);
    let state = AppState::new(corpus, Judge::default().with_workers(1), models, store)
        .unwrap()
        .with_token(token.map(str::to_string));
    router(Arc::new(state))
}

fn app() -> Router {
    app_with(SessionStore::in_memory(), None)
}

async fn call_as(app: &Router, method: &str, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    call_as(app, method, uri, body, None).await
}

async fn open(app: &Router, problem: &str, model: &str) -> String {
    let (status, body) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"problem_id": problem, "model_name": model, "participant": "t1"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn creating_sessions() {
    let app = app();
    let a = open(&app, "toll-road", "tutor").await;
    let b = open(&app, "toll-road", "tutor").await;
    assert_ne!(a, b);
    let (status, s) = call(&app, "GET", &format!("/sessions/{a}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["status"], "active");
    assert_eq!(s["generations_used"], 0);
    assert_eq!(s["transcript"], json!([]));

    let (status, err) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"problem_id": "nope", "model_name": "tutor"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "unknown_problem");
    assert!(err["message"].as_str().unwrap().contains("nope"));

    let (status, err) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"problem_id": "toll-road", "model_name": "ghost"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "unknown_model");

    let (status, err) = call(&app, "GET", "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "unknown_session");
}

#[tokio::test]
async fn problem_view_has_samples_only() {
    let app = app();
    let corpus = corpus();
    let (status, p) = call(&app, "GET", "/problems/signal-relay", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["title"], "Signal Relay");
    assert_eq!(p["samples"].as_array().unwrap().len(), 1);
    let text = p.to_string();
    for t in &corpus.get("signal-relay").unwrap().hidden_tests {
        let input = serde_json::to_string(&String::from_utf8_lossy(&t.input)).unwrap();
        assert!(!text.contains(input.trim_matches('"')), "hidden input {} leaked", t.test_id);
    }
    let (status, list) = call(&app, "GET", "/problems", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), corpus.len());
    let (status, err) = call(&app, "GET", "/problems/nope", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_problem")));
}

#[tokio::test]
async fn correct_first_generation_solves() {
    let app = app();
    let id = open(&app, "toll-road", "tutor").await;
    let (status, g) = call(&app, "POST", &format!("/sessions/{id}/generations"), None).await;
    assert_eq!(status, StatusCode::OK, "{g}");
    assert_eq!(g["generation"], 1);
    assert_eq!(g["status"], "solved");
    assert_eq!(g["unit_report"]["passed"], true);
    let kinds: Vec<&str> = g["session"]["transcript"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["model_message", "code_generation", "judge_result"]);
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/hints"), Some(json!({"text": "hi"}))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::CONFLICT, Some("session_closed")));
    let (_, err) = call(&app, "POST", &format!("/sessions/{id}/generations"), None).await;
    assert_eq!(err["code"], "session_closed");
}

#[tokio::test]
async fn budget_of_three_generations() {
    let app = app();
    let corpus = corpus();
    let id = open(&app, "signal-relay", "tutor").await;
    let mut snapshots: Vec<Vec<Value>> = Vec::new();
    for k in 1..=3 {
        let (status, g) = call(&app, "POST", &format!("/sessions/{id}/generations"), None).await;
        assert_eq!(status, StatusCode::OK, "{g}");
        assert_eq!(g["generation"], k);
        assert_eq!(g["status"], if k < 3 { "active" } else { "exhausted" });
        snapshots.push(g["session"]["transcript"].as_array().unwrap().clone());
        if k < 3 {
            let (status, _) =
                call(&app, "POST", &format!("/sessions/{id}/hints"), Some(json!({"text": "check tower n"}))).await;
            assert_eq!(status, StatusCode::OK);
        }
    }
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/generations"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "generation_budget_exhausted");

    let (_, s) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let transcript = s["transcript"].as_array().unwrap();
    let generations = transcript.iter().filter(|e| e["kind"] == "code_generation").count();
    assert_eq!(generations, 3);
    for snap in &snapshots {
        assert_eq!(&transcript[..snap.len()], &snap[..], "transcript must only grow");
    }
    for (i, e) in transcript.iter().enumerate() {
        assert_eq!(e["seq"], i);
    }
    let text = s.to_string();
    for t in &corpus.get("signal-relay").unwrap().hidden_tests {
        let needle = serde_json::to_string(&String::from_utf8_lossy(&t.input)).unwrap();
        assert!(!text.contains(needle.trim_matches('"')), "hidden input {} leaked", t.test_id);
    }
}

#[tokio::test]
async fn hints_reach_the_model() {
    let app = app();
    let id = open(&app, "orchard-walk", "tutor").await;
    let (_, g) = call(&app, "POST", &format!("/sessions/{id}/generations"), None).await;
    assert_eq!(g["status"], "active");
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/hints"), Some(json!({"text": "   "}))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("empty_hint")));
    for hint in ["walk the sample by hand", "think about the trees blocking paths"] {
        let (status, s) = call(&app, "POST", &format!("/sessions/{id}/hints"), Some(json!({"text": hint}))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(s["transcript"].as_array().unwrap().last().unwrap()["text"], hint);
    }
    let (_, g) = call(&app, "POST", &format!("/sessions/{id}/generations"), None).await;
    assert_eq!(g["generation"], 2);
    assert_eq!(g["status"], "solved");
}

#[tokio::test]
async fn client_errors_leave_the_session_active() {
    let app = app();
    let id = open(&app, "toll-road", "down").await;
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/generations"), None).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(err["code"], "client_error");
    let (_, s) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s["status"], "active");
    assert_eq!(s["generations_used"], 0);
    assert_eq!(s["transcript"], json!([]));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn long_poll_wakes_on_new_events() {
    let app = app();
    let id = open(&app, "toll-road", "tutor").await;
    let (_, empty) = call(&app, "GET", &format!("/sessions/{id}/events?since=0&timeout_ms=50"), None).await;
    assert_eq!(empty["events"], json!([]));
    assert_eq!(empty["next"], 0);

    let poller = {
        let app = app.clone();
        let id = id.clone();
        tokio::spawn(async move { call(&app, "GET", &format!("/sessions/{id}/events?since=0&timeout_ms=20000"), None).await })
    };
    tokio::time::sleep(std::time::Duration::from_millis(100)).await;
    let started = std::time::Instant::now();
    call(&app, "POST", &format!("/sessions/{id}/hints"), Some(json!({"text": "read carefully"}))).await;
    let (status, got) = poller.await.unwrap();
    assert_eq!(status, StatusCode::OK);
    assert!(started.elapsed() < std::time::Duration::from_secs(10));
    assert_eq!(got["events"].as_array().unwrap().len(), 1);
    assert_eq!(got["events"][0]["kind"], "human_hint");
    assert_eq!(got["next"], 1);

    let (_, rest) = call(&app, "GET", &format!("/sessions/{id}/events?since=1&timeout_ms=10"), None).await;
    assert_eq!(rest["events"], json!([]));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_generations_are_serialized() {
    let app = app();
    let id = open(&app, "signal-relay", "tutor").await;
    let tasks: Vec<_> = (0..5)
        .map(|_| {
            let app = app.clone();
            let id = id.clone();
            tokio::spawn(async move { call(&app, "POST", &format!("/sessions/{id}/generations"), None).await })
        })
        .collect();
    let mut ok = Vec::new();
    let mut rejected = 0;
    for t in tasks {
        let (status, body) = t.await.unwrap();
        if status == StatusCode::OK {
            ok.push(body["generation"].as_u64().unwrap());
        } else {
            assert_eq!(body["code"], "generation_budget_exhausted");
            rejected += 1;
        }
    }
    ok.sort();
    assert_eq!(ok, [1, 2, 3]);
    assert_eq!(rejected, 2);
    let (_, s) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s["generations_used"], 3);
}

#[tokio::test]
async fn bearer_token_is_enforced() {
    let app = app_with(SessionStore::in_memory(), Some("s3cret"));
    let (status, err) = call(&app, "GET", "/problems", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::UNAUTHORIZED, Some("unauthorized")));
    let (status, _) = call_as(&app, "GET", "/problems", None, Some("wrong")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call_as(&app, "GET", "/problems", None, Some("s3cret")).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn solve_rate_over_stored_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::on_disk(dir.path()).unwrap();
    for k in 0..18 {
        let mut s = Session::new(format!("fixture-{k:02}"), "toll-road", "tutor", "expert");
        s.status = if k < 17 { SessionStatus::Solved } else { SessionStatus::Exhausted };
        store.save(&s).unwrap();
    }
    let app = app_with(store.clone(), None);
    let (status, rates) = call(&app, "GET", "/stats/solve-rate", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rates["models"][0]["model"], "tutor");
    assert_eq!(rates["models"][0]["solved"], 17);
    assert_eq!(rates["models"][0]["finished"], 18);
    assert_eq!(rates["models"][0]["solve_rate"], 94.4);

    let (status, err) = call(&app, "GET", "/stats/solve-rate?model=down", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("no_sessions")));

    let id = open(&app, "toll-road", "tutor").await;
    call(&app, "POST", &format!("/sessions/{id}/hints"), Some(json!({"text": "persist me"}))).await;
    let restarted = app_with(store, None);
    let (status, s) = call(&restarted, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["transcript"][0]["text"], "persist me");
}

#[tokio::test]
async fn abandoning_closes_the_session() {
    let app = app();
    let id = open(&app, "toll-road", "tutor").await;
    let (status, s) = call(&app, "POST", &format!("/sessions/{id}/abandon"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["status"], "abandoned");
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/abandon"), None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::CONFLICT, Some("session_closed")));
}
