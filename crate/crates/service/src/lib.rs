//! HTTP/JSON front end for live dialogue sessions and batch trials.
//!
//! Routes (all bodies JSON):
//!
//! | method | path                               | body           | reply            |
//! |--------|------------------------------------|----------------|------------------|
//! | GET    | `/v1/health`                       |                | `Health`         |
//! | POST   | `/v1/sessions`                     | SessionOptions | SessionEnvelope  |
//! | GET    | `/v1/sessions/{id}`                |                | SessionEnvelope  |
//! | POST   | `/v1/sessions/{id}/utterances`     | UserInput      | SessionEnvelope  |
//! | GET    | `/v1/sessions/{id}/transcript`     |                | JSON lines       |
//! | DELETE | `/v1/sessions/{id}`                |                | SessionEnvelope  |
//! | POST   | `/v1/trials`                       | TrialRequest   | MetricsReport    |

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
pub use ferrovia_core::session::{ErrorBody, Health};
use ferrovia_core::session::{Session, SessionEnvelope, SessionError, SessionOptions, UserInput, SCHEMA_VERSION};
use ferrovia_core::trial::{run_trial, MetricsReport, TrialRequest};
use ferrovia_core::{Engine, EngineConfig, Grammar, Lexicon};
use serde::Deserialize;

pub const DEFAULT_MAX_SESSIONS: usize = 1024;
pub const MAX_TRIAL_DIALOGUES: usize = 20_000;

type SharedSession = Arc<tokio::sync::Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    engine: Arc<Engine>,
    lexicon: Arc<Lexicon>,
    grammar: Arc<Grammar>,
    sessions: Mutex<HashMap<String, SharedSession>>,
    max_sessions: usize,
}

impl AppState {
    pub fn new(max_sessions: usize) -> AppState {
        AppState::with_engine(Engine::builtin(EngineConfig::default()), max_sessions)
    }

    pub fn with_engine(engine: Engine, max_sessions: usize) -> AppState {
        AppState {
            inner: Arc::new(Inner {
                engine: Arc::new(engine),
                lexicon: Arc::new(Lexicon::builtin()),
                grammar: Arc::new(Grammar::builtin()),
                sessions: Mutex::new(HashMap::new()),
                max_sessions,
            }),
        }
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.lock().expect("session map poisoned").len()
    }

    fn session(&self, id: &str) -> Result<SharedSession, ApiError> {
        self.inner
            .sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }
}

impl Default for AppState {
    fn default() -> Self {
        AppState::new(DEFAULT_MAX_SESSIONS)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: ErrorBody {
                error: code.to_string(),
                message: message.into(),
            },
        }
    }

    fn unknown_session(id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }

    fn bad_json(e: serde_json::Error) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::Closed => (StatusCode::CONFLICT, "closed_session"),
            SessionError::InvalidFrame(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_frame"),
            SessionError::UnknownChannel(_) | SessionError::UnknownScenario(_) | SessionError::Config(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_options")
            }
            SessionError::Engine(_) => (StatusCode::INTERNAL_SERVER_ERROR, "engine_error"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// Parse an optional JSON body; an empty body means the type's default.
fn optional_json<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(ApiError::bad_json)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(close_session))
        .route("/v1/sessions/{id}/utterances", post(post_utterance))
        .route("/v1/sessions/{id}/transcript", get(transcript))
        .route("/v1/trials", post(trial))
        .with_state(state)
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        schema_version: SCHEMA_VERSION.into(),
        sessions: state.session_count(),
    })
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let options: SessionOptions = optional_json(&body)?;
    let inner = &state.inner;
    let id = uuid::Uuid::new_v4().to_string();
    let session = Session::new(
        id.clone(),
        Arc::clone(&inner.engine),
        Arc::clone(&inner.lexicon),
        Arc::clone(&inner.grammar),
        &options,
    )?;
    let envelope = session.envelope();
    {
        let mut sessions = inner.sessions.lock().expect("session map poisoned");
        if sessions.len() >= inner.max_sessions {
            return Err(ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "capacity_exceeded",
                format!("at most {} live sessions", inner.max_sessions),
            ));
        }
        sessions.insert(id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
    }
    tracing::info!(session = %id, "session created");
    Ok((StatusCode::CREATED, Json(envelope)).into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionEnvelope>, ApiError> {
    let session = state.session(&id)?;
    let guard = session.lock().await;
    Ok(Json(guard.envelope()))
}

async fn post_utterance(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionEnvelope>, ApiError> {
    let input: UserInput = serde_json::from_slice(&body).map_err(ApiError::bad_json)?;
    let session = state.session(&id)?;
    let mut guard = session
        .try_lock()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "busy", format!("session {id} is handling another utterance")))?;
    let envelope = guard.post(&input)?;
    tracing::debug!(session = %id, turn = envelope.turn, act = envelope.act.kind_name(), "turn");
    Ok(Json(envelope))
}

async fn transcript(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let body = session.lock().await.transcript().to_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn close_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionEnvelope>, ApiError> {
    let session = state.session(&id)?;
    let envelope = session.lock().await.close();
    state.inner.sessions.lock().expect("session map poisoned").remove(&id);
    tracing::info!(session = %id, "session closed");
    Ok(Json(envelope))
}

async fn trial(body: Bytes) -> Result<Json<MetricsReport>, ApiError> {
    let request: TrialRequest = serde_json::from_slice(&body).map_err(ApiError::bad_json)?;
    if request.n == 0 || request.n > MAX_TRIAL_DIALOGUES {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_trial",
            format!("n must be between 1 and {MAX_TRIAL_DIALOGUES}"),
        ));
    }
    let cfg = request
        .into_config()
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_trial", e.to_string()))?;
    let report = tokio::task::spawn_blocking(move || run_trial(cfg))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "trial_failed", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "trial_failed", e.to_string()))?;
    Ok(Json(report))
}
