//! JSON HTTP API over [`run_search`] and the feedback store.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{run_search, Deps, ProviderStatus, SearchError, SearchRequest};
use crate::feedback::{FeedbackError, FeedbackRecord, QuerySession, Scope};

/// Error body: `{"error": kind, "message": ..., "stage"?: ..., "field"?: ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl ToString) -> Self {
        ApiError {
            status,
            body: json!({ "error": kind, "message": message.to_string() }),
        }
    }

    fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.body[key] = json!(value);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", r.body_text())
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        let (status, kind) = if let SearchError::Validation(v) = &e {
            return ApiError::new(StatusCode::BAD_REQUEST, "validation", &v.message).with("field", &v.field);
        } else if e.is_backend_failure() {
            (StatusCode::BAD_GATEWAY, "backend")
        } else if e.is_client_error() {
            (StatusCode::BAD_REQUEST, "request")
        } else {
            (StatusCode::INTERNAL_SERVER_ERROR, "internal")
        };
        let mut err = ApiError::new(status, kind, &e);
        if let Some(stage) = e.stage() {
            err = err.with("stage", stage);
        }
        err
    }
}

impl From<FeedbackError> for ApiError {
    fn from(e: FeedbackError) -> Self {
        match &e {
            FeedbackError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", e),
            FeedbackError::Invalid(_) => ApiError::new(StatusCode::BAD_REQUEST, "validation", e),
            FeedbackError::Storage(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e),
        }
    }
}

/// A stored session with its current judgments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: QuerySession,
    pub feedback: Vec<FeedbackRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub graph_version: String,
    pub concepts: usize,
    pub providers: ProviderStatus,
}

#[derive(Debug, Deserialize)]
struct MetricsParams {
    query_id: Option<String>,
}

type AppState = Arc<Deps>;

pub fn router(deps: AppState) -> Router {
    Router::new()
        .route("/api/search", post(search))
        .route("/api/session/{query_id}", get(session))
        .route("/api/feedback", post(feedback))
        .route("/api/metrics", get(metrics))
        .route("/api/health", get(health))
        .with_state(deps)
}

async fn search(
    State(deps): State<AppState>,
    body: Result<Json<SearchRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    req.validate().map_err(SearchError::from)?;
    let resp = tokio::task::spawn_blocking(move || run_search(&req, &deps))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))??;
    Ok(Json(resp).into_response())
}

async fn session(State(deps): State<AppState>, Path(query_id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let session = deps
        .store
        .session(&query_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("unknown session {query_id}")))?;
    Ok(Json(SessionView {
        feedback: deps.store.feedback_for(&query_id),
        session,
    }))
}

async fn feedback(
    State(deps): State<AppState>,
    body: Result<Json<FeedbackRecord>, JsonRejection>,
) -> Result<StatusCode, ApiError> {
    let Json(rec) = body?;
    tokio::task::spawn_blocking(move || deps.store.record_feedback(&rec))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))??;
    Ok(StatusCode::NO_CONTENT)
}

async fn metrics(State(deps): State<AppState>, Query(p): Query<MetricsParams>) -> impl IntoResponse {
    let scope = p.query_id.map_or(Scope::All, Scope::Query);
    Json(deps.store.relevance_percentage(&scope))
}

async fn health(State(deps): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        graph_version: deps.graph_version.clone(),
        concepts: deps.graph.len(),
        providers: deps.provider_status(),
    })
}

/// Serves until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, deps: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(deps))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
