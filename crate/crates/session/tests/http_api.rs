use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use pigchase_core::game::ArrowKey;
use pigchase_core::stats::{analyze, read_rows, AnalysisOptions};
use pigchase_session::{
    router, run_cohort, AssignmentMode, CohortConfig, Envelope, ExportFilter, ManualClock, MessageType, SessionStore,
    StoreConfig,
};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

fn store() -> Arc<SessionStore> {
    let config = StoreConfig { assignment: AssignmentMode::Balanced, seed: 1, ..StoreConfig::default() };
    Arc::new(SessionStore::new(config, Arc::new(ManualClock::new(0))).unwrap())
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::test]
async fn full_session_over_http() {
    let app = router(store());
    let (status, body) =
        call(&app, "POST", "/sessions", Some(json!({"participant_id": "p1", "demographic": "Black"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = json_of(&body)["session_id"].as_str().unwrap().to_string();
    let (status, _) =
        call(&app, "POST", "/sessions", Some(json!({"participant_id": "p1", "demographic": "Black"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) =
        call(&app, "POST", "/sessions", Some(json!({"participant_id": "", "demographic": "Black"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, body) = call(&app, "GET", &format!("/sessions/{id}/instructions"), None).await;
    assert!(json_of(&body)["instruction_text"].as_str().unwrap().contains("AI agent"));
    let (_, body) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(json_of(&body)["board"].as_array().unwrap().len(), 9);

    let survey = json!({"answers": ["a", "b", "c", "d", "e"], "intelligence_estimate": 64});
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/survey"), Some(survey.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let mut seq = 0;
    for trial in 1..=15 {
        loop {
            seq += 1;
            let msg = json!(Envelope::key(trial, seq, ArrowKey::Up, 120));
            let (status, body) = call(&app, "POST", &format!("/sessions/{id}/turns"), Some(msg)).await;
            assert_eq!(status, StatusCode::OK);
            let replies: Vec<Envelope> = serde_json::from_slice(&body).unwrap();
            assert_eq!(replies[0].kind, MessageType::State);
            if replies.len() == 2 {
                assert_eq!(replies[1].payload["trial"], trial);
                break;
            }
        }
    }
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/survey"), Some(survey)).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let bad = json!({"answers": ["a", "b", "c", "d", "e"], "intelligence_estimate": 101});
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/survey"), Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, csv) = call(&app, "GET", "/export?format=csv", None).await;
    let rows = read_rows(std::str::from_utf8(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].exited, rows[0].total_score, rows[0].intelligence_estimate), (12, 36, Some(64)));
    let (_, transcripts) = call(&app, "GET", "/export?format=transcripts", None).await;
    let lines = std::str::from_utf8(&transcripts).unwrap().lines().count();
    assert_eq!(lines, 15 * 2 * 3);
    let (status, _) = call(&app, "GET", "/sessions/nope/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn empty_export_and_abandoned_filter() {
    let app = router(store());
    let (_, csv) = call(&app, "GET", "/export?format=csv", None).await;
    assert_eq!(std::str::from_utf8(&csv).unwrap().lines().count(), 1);
    let (_, body) = call(&app, "POST", "/sessions", Some(json!({"participant_id": "q", "demographic": "White"}))).await;
    let id = json_of(&body)["session_id"].as_str().unwrap().to_string();
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/abandon"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (_, sessions) = call(&app, "GET", "/export?format=sessions", None).await;
    assert!(sessions.is_empty());
    let (_, sessions) = call(&app, "GET", "/export?format=sessions&include_abandoned=true", None).await;
    assert_eq!(json_of(&sessions)["status"], "Abandoned");
}

async fn recv<S>(ws: &mut S) -> Envelope
where
    S: futures::Stream<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        if let Message::Text(t) = ws.next().await.unwrap().unwrap() {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

#[tokio::test]
async fn websocket_turn_channel_round_trip() {
    let store = store();
    let id = store.create_session("ws", pigchase_core::record::Demographic::NonWhite).unwrap().session_id;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(store.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/turns")).await.unwrap();
    let opening = recv(&mut ws).await;
    assert_eq!((opening.kind, opening.trial), (MessageType::State, 1));

    for seq in 1..=2 {
        let text = serde_json::to_string(&Envelope::key(1, seq, ArrowKey::Up, 90)).unwrap();
        ws.send(Message::Text(text.into())).await.unwrap();
    }
    let mut got = vec![];
    while got.len() < 3 {
        got.push(recv(&mut ws).await);
    }
    let kinds: Vec<_> = got.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, [MessageType::State, MessageType::State, MessageType::TrialEnd]);
    assert_eq!(got[2].payload["outcome"], "Exited");

    ws.send(Message::Text(serde_json::to_string(&Envelope::key(1, 3, ArrowKey::Up, 0)).unwrap().into())).await.unwrap();
    let e = recv(&mut ws).await;
    assert_eq!((e.kind, e.payload["code"].as_str()), (MessageType::Error, Some("trial_terminated")));
    assert_eq!(store.record(&id).unwrap().trials.len(), 1);
}

#[test]
fn cohort_export_feeds_the_analysis() {
    let store = store();
    let out = run_cohort(&store, &CohortConfig { per_demographic: 7, seed: 2, ..CohortConfig::default() }).unwrap();
    let mut rows = store.export_rows(&ExportFilter::default());
    out.attach_labels(&mut rows);
    assert_eq!(rows.len(), 21);

    let mut csv = vec![];
    pigchase_core::stats::write_rows_csv(&mut csv, &rows).unwrap();
    let back = read_rows(std::str::from_utf8(&csv).unwrap()).unwrap();
    assert_eq!(back, rows);

    let report = analyze(&back, &AnalysisOptions { zscore_threshold: f64::INFINITY, ..AnalysisOptions::default() });
    let sum = |rs: &[pigchase_core::stats::ParticipantRow]| rs.iter().map(|r| r.total_score).sum::<i64>();
    assert_eq!(sum(&report.kept), sum(&rows));
    let records: i64 = out.session_ids.iter().map(|s| i64::from(store.record(s).unwrap().total_score())).sum();
    assert_eq!(sum(&rows), records);
    assert!(report.anova.is_some());
}
