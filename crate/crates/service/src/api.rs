use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::session::{CreateSession, Submission};
use crate::{ServiceError, SessionStore};

#[derive(Clone)]
pub struct ApiState {
    pub store: Arc<SessionStore>,
    /// Shared bearer token; `None` leaves the API open.
    pub token: Option<String>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) | ServiceError::UnknownTask(_) => StatusCode::NOT_FOUND,
            ServiceError::DuplicateTask(_) => StatusCode::CONFLICT,
            ServiceError::Expired(_) => StatusCode::GONE,
            ServiceError::Invalid(_)
            | ServiceError::Environment(_)
            | ServiceError::Metric(_)
            | ServiceError::ModelBased(_)
            | ServiceError::Learner(_) => StatusCode::BAD_REQUEST,
            ServiceError::Replay { .. } | ServiceError::Log { .. } | ServiceError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

async fn require_token(State(state): State<ApiState>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let given = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return (StatusCode::UNAUTHORIZED, Json(json!({ "error": "missing or wrong token" }))).into_response();
        }
    }
    next.run(req).await
}

async fn create(State(state): State<ApiState>, Json(req): Json<CreateSession>) -> Result<Response, ServiceError> {
    let id = state.store.create(req)?;
    let info = state.store.with(&id, |s| Ok(s.info()))?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn list(State(state): State<ApiState>) -> Json<Vec<String>> {
    Json(state.store.ids())
}

async fn info(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(state.store.with(&id, |s| Ok(s.info()))?).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    #[serde(default)]
    annotator: Option<String>,
}

async fn next(
    State(state): State<ApiState>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ServiceError> {
    let annotator = q.annotator.unwrap_or_else(|| "anonymous".into());
    Ok(Json(state.store.with(&id, |s| s.next_task(&annotator))?).into_response())
}

async fn submit(
    State(state): State<ApiState>,
    Path(id): Path<String>,
    Json(sub): Json<Submission>,
) -> Result<Response, ServiceError> {
    Ok(Json(state.store.with(&id, |s| s.submit(&sub))?).into_response())
}

async fn leaderboard(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(state.store.with(&id, |s| Ok(s.leaderboard()))?).into_response())
}

async fn session_log(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let body = state.store.with(&id, |s| Ok(s.log_jsonl()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(info))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/judgments", post(submit))
        .route("/sessions/{id}/leaderboard", get(leaderboard))
        .route("/sessions/{id}/log", get(session_log))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: ApiState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
