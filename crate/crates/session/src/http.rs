//! HTTP and WebSocket front end over a [`SessionStore`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pigchase_core::record::{Demographic, SurveyResponse};
use pigchase_core::stats::{write_rows_csv, write_rows_jsonl};
use serde::Deserialize;
use serde_json::json;

use crate::protocol::{error_code, handle_message, handle_text, Envelope, MessageType};
use crate::store::{ExportFilter, SessionStore, StoreError};

type AppState = Arc<SessionStore>;

pub struct ApiError(StoreError);

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            StoreError::UnknownSession(_) => StatusCode::NOT_FOUND,
            StoreError::EmptyParticipant | StoreError::Survey(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Io(_) | StoreError::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::CONFLICT,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %self.0, "storage failure");
        }
        (status, Json(json!({ "code": error_code(&self.0), "message": self.0.to_string() }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    participant_id: String,
    demographic: Demographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    /// Participant rows, one JSON object per line.
    #[default]
    Jsonl,
    /// Participant rows as CSV.
    Csv,
    /// Full session records, one per line.
    Sessions,
    /// Per-action transcript events, one per line.
    Transcripts,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: ExportFormat,
    #[serde(default)]
    include_in_progress: bool,
    #[serde(default)]
    include_abandoned: bool,
    #[serde(default)]
    include_duplicates: bool,
}

impl ExportQuery {
    fn filter(&self) -> ExportFilter {
        ExportFilter {
            include_in_progress: self.include_in_progress,
            include_abandoned: self.include_abandoned,
            include_duplicates: self.include_duplicates,
        }
    }
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/instructions", get(instructions))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/record", get(record))
        .route("/sessions/{id}/turns", get(turns_ws).post(turns_http))
        .route("/sessions/{id}/survey", post(survey))
        .route("/sessions/{id}/abandon", post(abandon))
        .route("/export", get(export))
        .with_state(store)
}

async fn create(State(store): State<AppState>, Json(req): Json<CreateRequest>) -> Result<Response, ApiError> {
    let created = store.create_session(&req.participant_id, req.demographic)?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn instructions(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(store.instructions(&id)?).into_response())
}

async fn state(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(store.state(&id)?).into_response())
}

async fn record(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(store.record(&id)?).into_response())
}

async fn turns_http(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(msg): Json<Envelope>,
) -> Result<Response, ApiError> {
    store.record(&id)?;
    Ok(Json(handle_message(&store, &id, &msg)).into_response())
}

async fn turns_ws(
    State(store): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    store.record(&id)?;
    Ok(ws.on_upgrade(move |socket| turn_channel(socket, store, id)))
}

async fn send(socket: &mut WebSocket, env: &Envelope) -> bool {
    match serde_json::to_string(env) {
        Ok(text) => socket.send(Message::Text(text.into())).await.is_ok(),
        Err(_) => false,
    }
}

/// Sends the current board on connect, then answers each key message.
async fn turn_channel(mut socket: WebSocket, store: AppState, id: String) {
    let opening = match store.state(&id) {
        Ok(s) => Envelope { kind: MessageType::State, trial: s.trial, seq: 0, payload: json!(s) },
        Err(e) => Envelope::error(0, 0, error_code(&e), e.to_string()),
    };
    if !send(&mut socket, &opening).await {
        return;
    }
    while let Some(Ok(msg)) = socket.recv().await {
        let replies = match msg {
            Message::Text(text) => handle_text(&store, &id, text.as_str()),
            Message::Close(_) => break,
            _ => continue,
        };
        for r in &replies {
            if !send(&mut socket, r).await {
                return;
            }
        }
    }
}

async fn survey(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<SurveyResponse>,
) -> Result<Response, ApiError> {
    store.submit_survey(&id, body)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn abandon(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    store.abandon(&id)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

fn jsonl<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> Result<Vec<u8>, StoreError> {
    let mut out = vec![];
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Renders an export body and its content type.
pub fn render_export(
    store: &SessionStore,
    format: ExportFormat,
    filter: &ExportFilter,
) -> Result<(&'static str, Vec<u8>), StoreError> {
    let stats_err = |e: pigchase_core::stats::StatsError| StoreError::Io(std::io::Error::other(e.to_string()));
    let mut out = vec![];
    Ok(match format {
        ExportFormat::Csv => {
            write_rows_csv(&mut out, &store.export_rows(filter)).map_err(stats_err)?;
            ("text/csv", out)
        }
        ExportFormat::Jsonl => {
            write_rows_jsonl(&mut out, &store.export_rows(filter)).map_err(stats_err)?;
            ("application/x-ndjson", out)
        }
        ExportFormat::Sessions => {
            ("application/x-ndjson", jsonl(store.export_sessions(filter).into_iter().map(|(r, _)| r))?)
        }
        ExportFormat::Transcripts => {
            ("application/x-ndjson", jsonl(store.export_sessions(filter).into_iter().flat_map(|(_, t)| t))?)
        }
    })
}

async fn export(State(store): State<AppState>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let (content_type, body) = render_export(&store, q.format, &q.filter())?;
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

/// Serves until the process is stopped, expiring overdue trials once a second.
pub async fn serve(store: Arc<SessionStore>, addr: SocketAddr) -> std::io::Result<()> {
    let sweeper = store.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(1));
        loop {
            tick.tick().await;
            match sweeper.expire_all() {
                Ok(0) => {}
                Ok(n) => tracing::info!(n, "timed out idle trials"),
                Err(e) => tracing::error!(error = %e, "expiry sweep failed"),
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(store)).await
}
