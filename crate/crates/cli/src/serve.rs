//! HTTP and WebSocket session service for the browser client.
//!
//! | Method | Path | Body / reply |
//! |---|---|---|
//! | `GET` | `/api/health` | `{"status":"ok"}` |
//! | `POST` | `/api/sessions` | `{"text"?: [..]}` -> session id, page PNG (base64) and page geometry |
//! | `GET` | `/api/sessions/{id}/page.png` | rendered page |
//! | `GET` | `/api/sessions/{id}/stream` | WebSocket: pointer samples in, commands out |
//! | `GET` | `/api/sessions/{id}/log?kind=trajectory\|commands` | JSONL log so far |
//! | `DELETE` | `/api/sessions/{id}` | flushes logs, returns the session summary with metrics |
//! | `GET` | `/api/training?count=n` | Up/Down training cue slots |
//!
//! On the stream the server first sends the page geometry message, then one
//! command per processed frame. A malformed sample gets `{"error": ...}` and
//! the stream stays open.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use base64::Engine;
use futures_util::{SinkExt, StreamExt};
use lineguide::ebraille::{training_slots, TRAINING_CUE_S, TRAINING_GAP_S};
use lineguide::feedback::{write_command_log, CommandKind};
use lineguide::harness::{
    ClientSample, LiveSession, PageGeometryMessage, Pipeline, PipelineConfig, SessionMode, SessionSummary, WireError,
};
use lineguide::sim::{write_trajectory_jsonl, PageLayout, TrajectoryLog};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::{runtime, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    /// Per-session logs are written here as `<id>.trajectory.jsonl` and
    /// `<id>.commands.jsonl`.
    pub log_dir: PathBuf,
    /// Client bundle served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Page used when a session does not bring its own text.
    pub layout: PageLayout,
    pub pipeline: PipelineConfig,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8787".into(),
            log_dir: PathBuf::from("sessions"),
            static_dir: None,
            layout: PageLayout::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

type SessionSlot = Arc<Mutex<Option<LiveSession>>>;

struct AppState {
    pipeline: Arc<Pipeline>,
    layout: PageLayout,
    log_dir: PathBuf,
    sessions: Mutex<HashMap<String, SessionSlot>>,
}

impl AppState {
    fn slot(&self, id: &str) -> Result<SessionSlot, ApiError> {
        self.sessions.lock().expect("session map").get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }
}

struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn not_found(id: &str) -> Self {
        Self { status: StatusCode::NOT_FOUND, message: format!("unknown session {id}") }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.into() }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(WireError { error: self.message })).into_response()
    }
}

/// Builds the service router. Fails when the pipeline configuration is
/// invalid.
pub fn router(cfg: &ServeConfig) -> Result<Router, CliError> {
    let state = Arc::new(AppState {
        pipeline: Arc::new(Pipeline::new(cfg.pipeline.clone())?),
        layout: cfg.layout.clone(),
        log_dir: cfg.log_dir.clone(),
        sessions: Mutex::new(HashMap::new()),
    });
    cfg.layout.validate()?;
    let api = Router::new()
        .route("/api/health", get(|| async { Json(serde_json::json!({ "status": "ok" })) }))
        .route("/api/sessions", axum::routing::post(create_session))
        .route("/api/sessions/{id}", axum::routing::delete(close_session))
        .route("/api/sessions/{id}/page.png", get(page_png))
        .route("/api/sessions/{id}/stream", get(stream))
        .route("/api/sessions/{id}/log", get(session_log))
        .route("/api/training", get(training))
        .with_state(state);
    Ok(match &cfg.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    })
}

/// Runs the service until interrupted.
pub fn serve_blocking(cfg: ServeConfig) -> Result<(), CliError> {
    let addr: SocketAddr = cfg.addr.parse().map_err(|e| CliError::Usage(format!("addr {:?}: {e}", cfg.addr)))?;
    let app = router(&cfg)?;
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| runtime(format!("binding {addr}: {e}")))?;
        let local = listener.local_addr()?;
        println!("{}", serde_json::json!({ "listening": local.to_string() }));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime)
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CreateSession {
    /// Page text, one entry per line; the service's page when absent.
    text: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct CreatedSession {
    session_id: String,
    mode: SessionMode,
    px_per_mm: f64,
    page_png: String,
    page_image_url: String,
    geometry: PageGeometryMessage,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Option<Json<CreateSession>>,
) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let mut layout = state.layout.clone();
    if let Some(text) = req.text {
        layout.text = text;
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let st = state.clone();
    let session_id = id.clone();
    let session = tokio::task::spawn_blocking(move || {
        LiveSession::new(session_id, SessionMode::LivePointer, layout, st.pipeline.clone(), Some(&st.log_dir))
    })
    .await
    .map_err(ApiError::internal)?
    .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let png = session.page_png().map_err(ApiError::internal)?;
    let created = CreatedSession {
        session_id: id.clone(),
        mode: session.mode(),
        px_per_mm: state.pipeline.config().px_per_mm,
        page_png: base64::engine::general_purpose::STANDARD.encode(png),
        page_image_url: format!("/api/sessions/{id}/page.png"),
        geometry: session.geometry(),
    };
    state.sessions.lock().expect("session map").insert(id, Arc::new(Mutex::new(Some(session))));
    Ok((StatusCode::CREATED, Json(created)))
}

fn with_session<T>(slot: &SessionSlot, f: impl FnOnce(&mut LiveSession) -> T) -> Result<T, ApiError> {
    let mut guard = slot.lock().map_err(|_| ApiError::internal("session lock poisoned"))?;
    let session = guard.as_mut().ok_or_else(|| ApiError::bad_request("session is closed"))?;
    Ok(f(session))
}

async fn page_png(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = state.slot(&id)?;
    let png = with_session(&slot, |s| s.page_png())?.map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct LogQuery {
    kind: Option<String>,
}

async fn session_log(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<LogQuery>,
) -> Result<Response, ApiError> {
    let slot = state.slot(&id)?;
    let mut buf = Vec::new();
    match q.kind.as_deref().unwrap_or("trajectory") {
        "trajectory" => {
            let samples = with_session(&slot, |s| s.samples().to_vec())?;
            let log = TrajectoryLog { run: 0, samples, ..Default::default() };
            write_trajectory_jsonl(&mut buf, std::slice::from_ref(&log)).map_err(ApiError::internal)?;
        }
        "commands" => {
            let records = with_session(&slot, |s| s.commands().to_vec())?;
            write_command_log(&mut buf, &records).map_err(ApiError::internal)?;
        }
        other => return Err(ApiError::bad_request(format!("unknown log kind {other:?}"))),
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], buf).into_response())
}

async fn close_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionSummary>, ApiError> {
    let slot = state.sessions.lock().expect("session map").remove(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let session = slot.lock().map_err(|_| ApiError::internal("session lock poisoned"))?.take();
    let session = session.ok_or_else(|| ApiError::bad_request("session is closed"))?;
    let summary = tokio::task::spawn_blocking(move || session.close()).await.map_err(ApiError::internal)?;
    Ok(Json(summary.map_err(ApiError::internal)?))
}

#[derive(Debug, Deserialize)]
struct TrainingQuery {
    count: Option<usize>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct TrainingSlot {
    t: f64,
    kind: CommandKind,
}

async fn training(Query(q): Query<TrainingQuery>) -> Result<Json<serde_json::Value>, ApiError> {
    let count = q.count.unwrap_or(5);
    if count == 0 || count > 100 {
        return Err(ApiError::bad_request("count must lie in 1..=100"));
    }
    let slots: Vec<TrainingSlot> = training_slots(count).into_iter().map(|(t, kind)| TrainingSlot { t, kind }).collect();
    Ok(Json(serde_json::json!({ "cueS": TRAINING_CUE_S, "gapS": TRAINING_GAP_S, "slots": slots })))
}

async fn stream(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let slot = state.slot(&id)?;
    let geometry = with_session(&slot, |s| s.geometry())?;
    Ok(ws.on_upgrade(move |socket| pump(socket, slot, geometry)))
}

fn to_text<T: Serialize>(value: &T) -> Message {
    Message::Text(serde_json::to_string(value).expect("wire types serialize").into())
}

async fn pump(socket: WebSocket, slot: SessionSlot, geometry: PageGeometryMessage) {
    let (mut tx, mut rx) = socket.split();
    if tx.send(to_text(&geometry)).await.is_err() {
        return;
    }
    while let Some(Ok(msg)) = rx.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            Message::Binary(_) => {
                let _ = tx.send(to_text(&WireError { error: "binary messages are not accepted".into() })).await;
                continue;
            }
            _ => continue,
        };
        let reply = match ClientSample::parse(&text) {
            Err(e) => Some(to_text(&e)),
            Ok(sample) => {
                let slot = slot.clone();
                let result = tokio::task::spawn_blocking(move || with_session(&slot, |s| s.handle_sample(sample))).await;
                match result {
                    Ok(Ok(Ok(Some(cmd)))) => Some(to_text(&cmd)),
                    Ok(Ok(Ok(None))) => None,
                    Ok(Ok(Err(e))) => Some(to_text(&WireError { error: e.to_string() })),
                    Ok(Err(e)) => Some(to_text(&WireError { error: e.message })),
                    Err(e) => Some(to_text(&WireError { error: e.to_string() })),
                }
            }
        };
        if let Some(m) = reply {
            if tx.send(m).await.is_err() {
                break;
            }
        }
    }
}
