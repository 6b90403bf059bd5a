//! REST surface.
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | GET | `/study` | | instructions, item count, label names |
//! | POST | `/sessions` | `{"condition": "C0".."C3"}` | 201, new session |
//! | GET | `/sessions/{id}/items/{n}` | | item payload |
//! | POST | `/sessions/{id}/items/{n}/answer` | `{"label": 0 or 1}` | 200 once logged |
//! | GET | `/sessions/{id}/results` | | accuracy, overreliance, kappa |
//!
//! Errors are `{"error": message}` with 404 for unknown sessions or items,
//! 409 for a repeated answer, 422 for malformed bodies or labels and 425
//! for results requested before every item is answered.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::bundle::StudyBundle;
use crate::error::StudyError;
use crate::payload::{payload_for, Condition};
use crate::session::SessionStore;

pub struct AppState {
    pub bundle: StudyBundle,
    pub store: Mutex<SessionStore>,
}

impl AppState {
    pub fn new(bundle: StudyBundle, store: SessionStore) -> Arc<Self> {
        Arc::new(Self { bundle, store: Mutex::new(store) })
    }
}

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        let status = match &self {
            StudyError::UnknownSession(_) | StudyError::UnknownItem { .. } => StatusCode::NOT_FOUND,
            StudyError::DuplicateAnswer(_) => StatusCode::CONFLICT,
            StudyError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StudyError::Incomplete { .. } => StatusCode::TOO_EARLY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Reply = Result<Response, StudyError>;

fn body<T: for<'de> Deserialize<'de>>(payload: Result<Json<Value>, JsonRejection>) -> Result<T, StudyError> {
    let Json(v) = payload.map_err(|e| StudyError::Invalid(e.body_text()))?;
    serde_json::from_value(v).map_err(|e| StudyError::Invalid(e.to_string()))
}

fn item_index(raw: &str, total: usize) -> Result<usize, StudyError> {
    match raw.parse::<usize>() {
        Ok(n) if n < total => Ok(n),
        Ok(n) => Err(StudyError::UnknownItem { n, total }),
        Err(_) => Err(StudyError::UnknownItem { n: usize::MAX, total }),
    }
}

fn lock(state: &AppState) -> std::sync::MutexGuard<'_, SessionStore> {
    state.store.lock().unwrap_or_else(|p| p.into_inner())
}

async fn study(State(state): State<Arc<AppState>>) -> Json<Value> {
    let b = &state.bundle;
    Json(json!({ "instructions": b.instructions, "total": b.len(), "label_names": b.label_names }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    condition: String,
}

async fn create_session(State(state): State<Arc<AppState>>, payload: Result<Json<Value>, JsonRejection>) -> Reply {
    let req: CreateBody = body(payload)?;
    let condition: Condition = req.condition.parse()?;
    if condition == Condition::C2 && !state.bundle.all_dissenting() {
        return Err(StudyError::Invalid("condition C2 needs a bundle of dissenting instances".into()));
    }
    let id = lock(&state).create(condition)?;
    let reply = json!({ "session_id": id, "condition": condition, "total": state.bundle.len() });
    Ok((StatusCode::CREATED, Json(reply)).into_response())
}

async fn get_item(State(state): State<Arc<AppState>>, Path((id, n)): Path<(String, String)>) -> Reply {
    let condition = lock(&state).get(&id)?.condition;
    let n = item_index(&n, state.bundle.len())?;
    Ok(Json(payload_for(&state.bundle, n, condition)?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    label: Value,
}

async fn post_answer(
    State(state): State<Arc<AppState>>,
    Path((id, n)): Path<(String, String)>,
    payload: Result<Json<Value>, JsonRejection>,
) -> Reply {
    let n = {
        let store = lock(&state);
        store.get(&id)?;
        item_index(&n, state.bundle.len())?
    };
    let req: AnswerBody = body(payload)?;
    let label = match req.label.as_u64() {
        Some(l @ (0 | 1)) => l as u8,
        _ => return Err(StudyError::Invalid(format!("label must be 0 or 1, got {}", req.label))),
    };
    let mut store = lock(&state);
    let session = store.answer(&id, n, label)?;
    let reply = json!({
        "session_id": id,
        "n": n,
        "label": label,
        "answered": session.answered(),
        "completed": session.completed(),
    });
    Ok(Json(reply).into_response())
}

async fn get_results(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Reply {
    let results = lock(&state).results(&state.bundle, &id)?;
    Ok(Json(results).into_response())
}

/// The API routes, plus static files from `static_dir` for any other path.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/study", get(study))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/items/{n}", get(get_item))
        .route("/sessions/{id}/items/{n}/answer", post(post_answer))
        .route("/sessions/{id}/results", get(get_results))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state, static_dir)).await
}
