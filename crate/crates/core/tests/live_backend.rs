mod support;

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use pkgsentry::corpus::load_package;
use pkgsentry::llmclient::{
    ChatBackend, ChatRequest, CostLedger, LiveBackend, LlmClient, LlmError, MockAnalyst, VirtualClock, API_KEY_ENV,
};
use pkgsentry::prescreen::RuleSet;
use pkgsentry::prompts::Profile;
use pkgsentry::workflow::{read_run, run_packages, Mode, PipelineConfig};
use serde_json::{json, Value};
use support::golden_dir;

/// What the fake endpoint does with the next request.
#[derive(Clone)]
enum Reply {
    Status(u16, Option<&'static str>),
    Text(&'static str),
    /// Answer with the offline analyst.
    Analyst,
}

#[derive(Default)]
struct Endpoint {
    script: Mutex<VecDeque<Reply>>,
    seen: Mutex<Vec<(Option<String>, Value)>>,
}

async fn completions(State(ep): State<Arc<Endpoint>>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    let auth = headers.get("authorization").and_then(|v| v.to_str().ok()).map(String::from);
    ep.seen.lock().unwrap().push((auth, body.clone()));
    let reply = ep.script.lock().unwrap().pop_front().unwrap_or(Reply::Analyst);
    match reply {
        Reply::Status(code, retry_after) => {
            let mut resp = (StatusCode::from_u16(code).unwrap(), "nope").into_response();
            if let Some(s) = retry_after {
                resp.headers_mut().insert("retry-after", s.parse().unwrap());
            }
            resp
        }
        Reply::Text(t) => Json(json!({
            "choices": [{"message": {"content": t}}],
            "usage": {"prompt_tokens": 100, "completion_tokens": 20}
        }))
        .into_response(),
        Reply::Analyst => {
            let req = ChatRequest {
                model_id: body["model"].as_str().unwrap().to_string(),
                system_text: body["messages"][0]["content"].as_str().unwrap().to_string(),
                user_text: body["messages"][1]["content"].as_str().unwrap().to_string(),
                temperature: body["temperature"].as_f64().unwrap(),
                top_p: body["top_p"].as_f64().unwrap(),
                n: body["n"].as_u64().unwrap() as u32,
                attempt: 1,
            };
            let out = MockAnalyst::new(RuleSet::builtin()).complete(&req).unwrap();
            let choices: Vec<Value> = out.texts.iter().map(|t| json!({"message": {"content": t}})).collect();
            Json(json!({"choices": choices})).into_response()
        }
    }
}

fn spawn(script: Vec<Reply>) -> (String, Arc<Endpoint>) {
    let ep = Arc::new(Endpoint {
        script: Mutex::new(script.into()),
        ..Endpoint::default()
    });
    let app = Router::new().route("/v1/chat/completions", post(completions)).with_state(ep.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (format!("http://{}", rx.recv().unwrap()), ep)
}

fn request() -> ChatRequest {
    ChatRequest {
        model_id: "gpt-4-1106-preview".into(),
        system_text: "system".into(),
        user_text: "user".into(),
        temperature: 1.0,
        top_p: 0.9,
        n: 1,
        attempt: 1,
    }
}

fn client(base: &str, clock: Arc<VirtualClock>) -> LlmClient {
    let backend = LiveBackend::new(base, "test-key", Duration::from_secs(10)).unwrap();
    let profile = Profile::builtin("gpt-4").unwrap();
    LlmClient::new(Arc::new(backend), Arc::new(CostLedger::for_profile(&profile.model))).with_clock(clock)
}

#[test]
fn rate_limit_then_success_honors_retry_after() {
    let (base, ep) = spawn(vec![Reply::Status(429, Some("7")), Reply::Text("{\"malware\": 0}")]);
    let clock = Arc::new(VirtualClock::new());
    let c = client(&base, clock.clone());
    let resp = c.complete(&request()).unwrap();
    assert_eq!(resp.texts, vec!["{\"malware\": 0}"]);
    assert_eq!((resp.prompt_tokens, resp.completion_tokens), (100, 20));
    assert_eq!(clock.sleeps(), vec![Duration::from_secs(7)]);

    let seen = ep.seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0].0.as_deref(), Some("Bearer test-key"));
    assert_eq!(seen[0].1["messages"][0]["role"], "system");
    assert_eq!(seen[0].1["top_p"], 0.9);
    // charged once, for the successful call
    let summary = c.ledger().report();
    assert_eq!((summary.calls, summary.prompt_tokens, summary.completion_tokens), (1, 100, 20));
}

#[test]
fn server_errors_back_off_and_then_give_up() {
    let (base, ep) = spawn(vec![Reply::Status(503, None); 5]);
    let clock = Arc::new(VirtualClock::new());
    let err = client(&base, clock.clone()).complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::Transport { retryable: true, .. }), "{err:?}");
    assert!(err.to_string().contains("gave up after 5 attempts"));
    assert_eq!(ep.seen.lock().unwrap().len(), 5);
    let sleeps = clock.sleeps();
    assert_eq!(sleeps.len(), 4);
    for (i, s) in sleeps.iter().enumerate() {
        let base = Duration::from_secs(1 << i);
        assert!(*s >= base && *s <= base.mul_f64(1.25), "retry {i}: {s:?}");
    }
}

#[test]
fn client_errors_are_not_retried() {
    let (base, ep) = spawn(vec![Reply::Status(400, None)]);
    let err = client(&base, Arc::new(VirtualClock::new())).complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::Rejected { status: 400, .. }), "{err:?}");
    assert_eq!(ep.seen.lock().unwrap().len(), 1);
}

#[test]
fn empty_completion_is_retried() {
    let (base, ep) = spawn(vec![Reply::Text(""), Reply::Text("ok")]);
    let resp = client(&base, Arc::new(VirtualClock::new())).complete(&request()).unwrap();
    assert_eq!(resp.texts, vec!["ok"]);
    assert_eq!(ep.seen.lock().unwrap().len(), 2);
}

#[test]
fn pipeline_runs_over_http() {
    let (base, _) = spawn(Vec::new());
    let profile = Profile::builtin("gpt-4").unwrap();
    let c = client(&base, Arc::new(VirtualClock::new()));
    let pkg = load_package(&golden_dir()).unwrap();
    let out = run_packages(&[pkg], &PipelineConfig::new(profile, Mode::Full), &c);
    assert!(out.verdicts[0].is_malicious);
    assert_eq!(out.verdicts[0].max_malware_score, 1.0);
    // no usage block: tokens are estimated, so cost is still charged
    assert!(c.ledger().report().prompt_tokens > 0);
}

#[test]
fn cli_live_backend_uses_profile_base_url() {
    let (base, ep) = spawn(Vec::new());
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("local.toml");
    let builtin = include_str!("../resources/profiles/gpt-4.toml");
    let local = builtin.replace("https://api.openai.com", &base);
    assert_ne!(local, builtin);
    std::fs::write(&profile, local).unwrap();
    let out_dir = dir.path().join("run");
    let out = Command::new(env!("CARGO_BIN_EXE_pkgsentry"))
        .args(["scan", golden_dir().to_str().unwrap(), "--backend", "live"])
        .args(["--profile", profile.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .env(API_KEY_ENV, "cli-key")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = read_run(&out_dir).unwrap();
    assert_eq!(run.meta.backend, "live");
    assert!(run.verdicts[0].is_malicious);
    let seen = ep.seen.lock().unwrap();
    assert!(!seen.is_empty());
    assert!(seen.iter().all(|(auth, _)| auth.as_deref() == Some("Bearer cli-key")));
}
