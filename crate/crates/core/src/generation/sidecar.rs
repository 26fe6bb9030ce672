//! Serve any [`GenerationBackend`] over the sidecar HTTP protocol.

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};

use super::{BackendError, GenerationBackend, GenerationInput, GenerationParams};
use crate::layout::encode_png;
use crate::promptgen::PromptBundle;

pub fn router(backend: Arc<dyn GenerationBackend>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/generate", post(generate))
        .layer(DefaultBodyLimit::max(32 * 1024 * 1024))
        .with_state(backend)
}

async fn health(State(backend): State<Arc<dyn GenerationBackend>>) -> Response {
    match tokio::task::spawn_blocking(move || backend.probe()).await {
        Ok(report) => Json(report).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn bad_request(msg: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, msg.into()).into_response()
}

async fn generate(State(backend): State<Arc<dyn GenerationBackend>>, mut multipart: Multipart) -> Response {
    let (mut prompt, mut layout, mut params) = (None, None, None);
    loop {
        let field = match multipart.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => return bad_request(e.to_string()),
        };
        let name = field.name().unwrap_or_default().to_string();
        let bytes = match field.bytes().await {
            Ok(b) => b,
            Err(e) => return bad_request(e.to_string()),
        };
        match name.as_str() {
            "prompt" => match serde_json::from_slice::<PromptBundle>(&bytes) {
                Ok(p) => prompt = Some(p),
                Err(e) => return bad_request(format!("prompt: {e}")),
            },
            "params" => match serde_json::from_slice::<GenerationParams>(&bytes) {
                Ok(p) => params = Some(p),
                Err(e) => return bad_request(format!("params: {e}")),
            },
            "layout" => layout = Some(bytes.to_vec()),
            _ => {}
        }
    }
    let (Some(prompt), Some(layout_png), Some(params)) = (prompt, layout, params) else {
        return bad_request("multipart body needs prompt, layout and params parts");
    };
    let layout_image = match image::load_from_memory_with_format(&layout_png, image::ImageFormat::Png) {
        Ok(img) => img.to_rgb8(),
        Err(e) => return bad_request(format!("layout: {e}")),
    };
    let input = GenerationInput { prompt, layout_png, layout_image, params };
    let result = tokio::task::spawn_blocking(move || backend.render(&input)).await;
    match result {
        Ok(Ok(img)) => ([(header::CONTENT_TYPE, "image/png")], encode_png(&img)).into_response(),
        Ok(Err(BackendError::Rejected(m))) => (StatusCode::UNPROCESSABLE_ENTITY, m).into_response(),
        Ok(Err(BackendError::Unavailable(m))) => (StatusCode::SERVICE_UNAVAILABLE, m).into_response(),
        Ok(Err(BackendError::Failed(m))) => (StatusCode::INTERNAL_SERVER_ERROR, m).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}
