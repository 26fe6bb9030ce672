//! REST interface used by the web UI.
//!
//! | route | |
//! |---|---|
//! | `POST /api/jobs` | submit a [`DesignRequest`] JSON body; 202 with `{job_id, state}` |
//! | `GET /api/jobs/{id}` | [`DesignJob`] |
//! | `GET /api/jobs?state=&room_type=&style=&page=&page_size=` | [`JobPage`](super::JobPage), newest first |
//! | `GET /api/jobs/{id}/artifacts/{stage}` | raw artifact bytes |
//! | `GET /api/catalog/categories` | `{store, categories}` |
//! | `GET /api/labels` | configured room types and styles |
//! | `GET /api/health` | [`ServiceHealth`](super::ServiceHealth) |
//!
//! Errors are JSON `{error, message}` plus `violations` for invalid requests.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{DesignJob, JobFilter, JobService, JobState, ServiceError};
use crate::model::DesignRequest;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ServiceError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            ServiceError::NotReady(_) => (StatusCode::SERVICE_UNAVAILABLE, "not_ready"),
            ServiceError::UnknownJob(_) => (StatusCode::NOT_FOUND, "unknown_job"),
            ServiceError::UnknownStage(_) => (StatusCode::NOT_FOUND, "unknown_stage"),
            ServiceError::ArtifactNotReady { .. } => (StatusCode::CONFLICT, "artifact_not_ready"),
            ServiceError::ArtifactUnavailable { .. } => (StatusCode::NOT_FOUND, "artifact_unavailable"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut body = json!({ "error": code, "message": self.to_string() });
        if let ServiceError::Invalid(report) = &self {
            body["violations"] = json!(report.violations);
        }
        (status, Json(body)).into_response()
    }
}

fn bad_request(message: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": "bad_request", "message": message.into() }))).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("blocking task panicked")
}

pub fn router(service: JobService) -> Router {
    let ui_dir = service.config().ui_dir.clone();
    let api = Router::new()
        .route("/api/jobs", get(list_jobs).post(submit_job))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/jobs/{id}/artifacts/{stage}", get(get_artifact))
        .route("/api/catalog/categories", get(categories))
        .route("/api/labels", get(labels))
        .route("/api/health", get(health))
        .with_state(service);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serve the API until ctrl-c.
pub async fn serve(service: JobService, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn bind(addr: &str) -> std::io::Result<(tokio::net::TcpListener, SocketAddr)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}

async fn submit_job(State(svc): State<JobService>, body: Bytes) -> Response {
    let request: DesignRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("request body: {e}")),
    };
    match blocking(move || svc.submit(request)).await {
        Ok(job_id) => {
            (StatusCode::ACCEPTED, Json(json!({ "job_id": job_id, "state": JobState::Queued }))).into_response()
        }
        Err(e) => e.into_response(),
    }
}

async fn get_job(State(svc): State<JobService>, Path(id): Path<String>) -> Result<Json<DesignJob>, ServiceError> {
    blocking(move || svc.get_job(&id)).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    state: Option<String>,
    room_type: Option<String>,
    style: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

async fn list_jobs(State(svc): State<JobService>, Query(q): Query<ListQuery>) -> Response {
    let state = match q.state.as_deref().filter(|s| !s.is_empty()).map(str::parse::<JobState>).transpose() {
        Ok(s) => s,
        Err(e) => return bad_request(e),
    };
    let filter =
        JobFilter { state, room_type: q.room_type.filter(|s| !s.is_empty()), style: q.style.filter(|s| !s.is_empty()) };
    match blocking(move || svc.list_jobs(&filter, q.page.unwrap_or(1), q.page_size)).await {
        Ok(page) => Json(page).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_artifact(State(svc): State<JobService>, Path((id, stage)): Path<(String, String)>) -> Response {
    match blocking(move || svc.get_artifact(&id, &stage)).await {
        Ok((bytes, media)) => ([(header::CONTENT_TYPE, media)], bytes).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn categories(State(svc): State<JobService>) -> Response {
    match svc.catalog() {
        Ok(c) => Json(json!({ "store": c.store, "categories": c.categories() })).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn labels(State(svc): State<JobService>) -> Response {
    Json(svc.labels().clone()).into_response()
}

async fn health(State(svc): State<JobService>) -> Response {
    Json(blocking(move || svc.health()).await).into_response()
}
