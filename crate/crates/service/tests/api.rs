//! Drives a live server bound to an ephemeral port.

use std::path::PathBuf;
use std::time::Duration;

use devscreen_core::casebase::CaseBase;
use devscreen_core::engine::{Screener, DEFAULT_K};
use devscreen_core::scale::{default_scale, Response, ResponseSheet};
use devscreen_core::similarity::WeightProfile;
use devscreen_core::synth::{generate, SynthConfig};
use devscreen_service::{serve, ApiError, AppState, CaseList, ServiceConfig};
use reqwest::StatusCode;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

struct Server {
    url: String,
    client: reqwest::Client,
    casebase: PathBuf,
    _dir: tempfile::TempDir,
    _stop: oneshot::Sender<()>,
}

impl Server {
    async fn start(base: CaseBase) -> Server {
        Self::start_with_ttl(base, Duration::from_secs(600)).await
    }

    async fn start_with_ttl(base: CaseBase, ttl: Duration) -> Server {
        let dir = tempfile::tempdir().unwrap();
        let casebase = dir.path().join("cases.jsonl");
        base.save(&casebase).unwrap();
        let state = AppState::new(
            ServiceConfig {
                screener: Screener::new(default_scale(), WeightProfile::default(), DEFAULT_K),
                casebase_path: Some(casebase.clone()),
                session_ttl: ttl,
                source_tag: "test".into(),
                bone_age: None,
            },
            base,
        );
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let (stop, rx) = oneshot::channel::<()>();
        tokio::spawn(serve(listener, state, async {
            let _ = rx.await;
        }));
        Server {
            url,
            client: reqwest::Client::new(),
            casebase,
            _dir: dir,
            _stop: stop,
        }
    }

    async fn post(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        let r = self.client.post(format!("{}{path}", self.url)).json(body).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.url)).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }

    async fn delete(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.delete(format!("{}{path}", self.url)).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }
}

fn sheet(age: f64, yes_through: u8) -> ResponseSheet {
    let scale = default_scale();
    ResponseSheet {
        answers: scale
            .developmental_questions()
            .map(|q| {
                let a = if q.age_group.unwrap() <= yes_through { Response::Yes } else { Response::No };
                (q.id.clone(), a)
            })
            .collect(),
        physiological_values: Default::default(),
        physical_age_months: age,
        bone_age_months: None,
    }
}

fn sheet_json(age: f64, yes_through: u8) -> Value {
    serde_json::to_value(sheet(age, yes_through)).unwrap()
}

fn assert_api_error(status: StatusCode, body: &Value, want_status: u16, code: &str) {
    assert_eq!(status.as_u16(), want_status, "{body}");
    let err: ApiError = serde_json::from_value(body.clone()).expect("ApiError body");
    assert_eq!(err.code, code);
    assert!(!err.message.is_empty());
}

fn synthetic_base(cases: usize) -> CaseBase {
    let screener = Screener::new(default_scale(), WeightProfile::default(), DEFAULT_K);
    generate(&SynthConfig { cases, queries: 0, ..Default::default() }, &screener).unwrap().base
}

#[tokio::test]
async fn health_and_scale() {
    let s = Server::start(CaseBase::new()).await;
    let (status, health) = s.get("/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health["status"], "ok");
    assert_eq!(health["cases"], 0);

    let (status, scale) = s.get("/scale").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(scale["age_groups"].as_array().unwrap().len(), 19);
    assert_eq!(scale["questions"].as_array().unwrap().len(), 179);
}

#[tokio::test]
async fn happy_path_and_learning_loop() {
    let s = Server::start(CaseBase::new()).await;

    let (status, session) = s.post("/sessions", &sheet_json(30.0, 7)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(session["matches"].as_array().unwrap().len(), 0);
    assert_eq!(session["proposed_solution"], "");
    assert_eq!(session["state"], "awaiting_revision");
    assert_eq!(session["diagnostic_assessment_required"], false);
    let id = session["session_id"].as_str().unwrap().to_string();

    let (status, revised) = s
        .post(
            &format!("/sessions/{id}/revise"),
            &json!({"reviser": "dr. zhao", "solution": "weekly speech therapy"}),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(revised["proposed_solution"], "weekly speech therapy");
    assert_eq!(revised["revised_by"], "dr. zhao");

    let (status, retained) = s.post(&format!("/sessions/{id}/retain"), &json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(retained["outcome"], "added");
    let case_id = retained["case_id"].as_str().unwrap().to_string();

    let (status, case) = s.get(&format!("/cases/{case_id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(case["solution"], "weekly speech therapy");
    assert_eq!(case["status"], "verified");
    assert_eq!(case["revised_by"], "dr. zhao");
    assert_eq!(CaseBase::load(&s.casebase).unwrap().len(), 1);

    let (_, closed) = s.get(&format!("/sessions/{id}")).await;
    assert_eq!(closed["state"], "closed");

    // learning loop: the identical sheet now finds itself
    let (status, again) = s.post("/sessions", &sheet_json(30.0, 7)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(again["matches"][0]["case_id"], case_id.as_str());
    assert_eq!(again["matches"][0]["rank"], 1);
    assert_eq!(again["matches"][0]["score"]["value"], 1.0);
    assert_eq!(again["matches"][0]["score"]["per_index"].as_array().unwrap().len(), 11);
    assert_eq!(again["proposed_solution"], "weekly speech therapy");
    let id2 = again["session_id"].as_str().unwrap();
    let (status, merged) = s.post(&format!("/sessions/{id2}/retain"), &json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(merged["outcome"], "merged");
    assert_eq!(merged["case_id"], case_id.as_str());
    let (_, list) = s.get("/cases").await;
    assert_eq!(list["total"], 1);
}

#[tokio::test]
async fn documented_error_codes() {
    let s = Server::start(CaseBase::new()).await;

    let mut incomplete = sheet(30.0, 7);
    incomplete.answers.remove("sco-010");
    let (status, body) = s.post("/sessions", &serde_json::to_value(incomplete).unwrap()).await;
    assert_api_error(status, &body, 400, "IncompleteSheet");
    assert_eq!(body["detail"]["missing"][0], "sco-010");

    let mut unknown = sheet(30.0, 7);
    unknown.answers.insert("xyz-999".into(), Response::Yes);
    let (status, body) = s.post("/sessions", &serde_json::to_value(unknown).unwrap()).await;
    assert_api_error(status, &body, 400, "UnknownQuestion");

    let (status, body) = s.post("/sessions", &sheet_json(0.0, 7)).await;
    assert_api_error(status, &body, 422, "NonPositiveAge");
    let (status, body) = s.post("/sessions", &sheet_json(-4.0, 7)).await;
    assert_api_error(status, &body, 422, "NonPositiveAge");

    let (status, body) = s.post("/sessions", &json!({"answers": {}})).await;
    assert_api_error(status, &body, 400, "MalformedBody");

    let (status, body) = s.post("/sessions/S-999999/revise", &json!({"reviser": "x"})).await;
    assert_api_error(status, &body, 404, "SessionNotFound");
    let (status, body) = s.post("/sessions/S-999999/retain", &json!({})).await;
    assert_api_error(status, &body, 404, "SessionNotFound");
    let (status, body) = s.get("/cases/nope").await;
    assert_api_error(status, &body, 404, "CaseNotFound");
    let (status, body) = s.delete("/cases/nope").await;
    assert_api_error(status, &body, 404, "CaseNotFound");
    let (status, body) = s.get("/no/such/route").await;
    assert_api_error(status, &body, 404, "NotFound");

    let (_, session) = s.post("/sessions", &sheet_json(30.0, 7)).await;
    let id = session["session_id"].as_str().unwrap();
    let (status, body) = s.post(&format!("/sessions/{id}/revise"), &json!({"reviser": "  "})).await;
    assert_api_error(status, &body, 400, "MissingReviser");
    let (status, body) = s
        .post(&format!("/sessions/{id}/revise"), &json!({"reviser": "a", "status_override": "unsure"}))
        .await;
    assert_api_error(status, &body, 400, "MalformedBody");

    let (status, _) = s.post(&format!("/sessions/{id}/retain"), &json!({})).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = s.post(&format!("/sessions/{id}/retain"), &json!({})).await;
    assert_api_error(status, &body, 409, "SessionClosed");
    let (status, body) = s.post(&format!("/sessions/{id}/revise"), &json!({"reviser": "b"})).await;
    assert_api_error(status, &body, 409, "SessionClosed");
}

#[tokio::test]
async fn status_override_and_unreliable_sheet() {
    let s = Server::start(CaseBase::new()).await;
    let mut unreliable = sheet(40.0, 9);
    for id in unreliable.answers.keys().take(17).cloned().collect::<Vec<_>>() {
        unreliable.answers.insert(id, Response::DontKnow);
    }
    let (status, session) = s.post("/sessions", &serde_json::to_value(unreliable).unwrap()).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(session["diagnostic_assessment_required"], true);
    assert_eq!(session["judgment"]["reliability"], "unreliable");
    assert_eq!(session["notes"][0], "diagnostic assessment required");

    let id = session["session_id"].as_str().unwrap();
    let ratio = session["judgment"]["ratio"].clone();
    let (status, revised) = s
        .post(&format!("/sessions/{id}/revise"), &json!({"reviser": "r", "status_override": "edge"}))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(revised["judgment"]["status"], "edge");
    assert_eq!(revised["judgment"]["ratio"], ratio);
}

#[tokio::test]
async fn matches_pagination_and_delete() {
    let base = synthetic_base(12);
    let first_id = base.records().next().unwrap().id.clone();
    let s = Server::start(base).await;

    let (status, session) = s.post("/sessions", &sheet_json(36.0, 9)).await;
    assert_eq!(status, StatusCode::CREATED);
    let matches = session["matches"].as_array().unwrap();
    assert_eq!(matches.len(), 10);
    let scores: Vec<f64> = matches.iter().map(|m| m["score"]["value"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(matches.iter().all(|m| m["solution"].as_str().is_some()));

    let (status, short) = s.post("/sessions?k=3", &sheet_json(36.0, 9)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(short["matches"].as_array().unwrap().len(), 3);
    let (status, body) = s.post("/sessions?k=0", &sheet_json(36.0, 9)).await;
    assert_api_error(status, &body, 400, "InvalidK");

    // hits were recorded against the returned cases
    let top = matches[0]["case_id"].as_str().unwrap();
    let (_, case) = s.get(&format!("/cases/{top}")).await;
    assert_eq!(case["usage_count"], 2);

    let (status, page) = s.get("/cases?limit=5").await;
    assert_eq!(status, StatusCode::OK);
    let page: CaseList = serde_json::from_value(page).unwrap();
    assert_eq!(page.items.len(), 5);
    assert_eq!(page.total, 12);
    let (_, tail) = s.get("/cases?offset=10&limit=5").await;
    assert_eq!(tail["items"].as_array().unwrap().len(), 2);
    let (status, body) = s.get("/cases?limit=abc").await;
    assert_api_error(status, &body, 400, "InvalidQuery");

    let (status, deleted) = s.delete(&format!("/cases/{first_id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(deleted["total"], 11);
    let (_, list) = s.get("/cases").await;
    assert_eq!(list["total"], 11);
    assert_eq!(CaseBase::load(&s.casebase).unwrap().len(), 11);
}

#[tokio::test]
async fn concurrent_retains_are_serialized() {
    let s = Server::start(CaseBase::new()).await;
    let mut ids = Vec::new();
    for i in 0..20 {
        let (_, session) = s.post("/sessions", &sheet_json(10.0 + i as f64, 5)).await;
        ids.push(session["session_id"].as_str().unwrap().to_string());
    }
    // every session retained twice at once: exactly one wins per session
    let mut handles = Vec::new();
    for id in ids.iter().chain(ids.iter()) {
        let client = s.client.clone();
        let url = format!("{}/sessions/{id}/retain", s.url);
        handles.push(tokio::spawn(async move { client.post(url).send().await.unwrap().status() }));
    }
    let mut ok = 0;
    let mut conflict = 0;
    for h in handles {
        match h.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => conflict += 1,
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!((ok, conflict), (20, 20));
    assert_eq!(CaseBase::load(&s.casebase).unwrap().len(), 20);
}

#[tokio::test]
async fn sessions_expire() {
    let s = Server::start_with_ttl(CaseBase::new(), Duration::from_millis(50)).await;
    let (_, session) = s.post("/sessions", &sheet_json(30.0, 7)).await;
    let id = session["session_id"].as_str().unwrap();
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (status, body) = s.get(&format!("/sessions/{id}")).await;
    assert_api_error(status, &body, 404, "SessionNotFound");
}
