use std::time::{Duration, Instant};

use image::RgbImage;
use reqwest::blocking::multipart::{Form, Part};
use reqwest::StatusCode;

use super::{
    BackendError, BackendStatus, GenerationBackend, GenerationInput, HealthReport, DEFAULT_TIMEOUT, PROBE_TIMEOUT,
};

/// Client for a diffusion sidecar speaking the generation protocol:
///
/// * `GET  {base}/health`   -> [`HealthReport`] JSON
/// * `POST {base}/generate` multipart `prompt` (JSON), `layout` (PNG),
///   `params` (JSON) -> PNG
///
/// HTTP clients are created per call, so the backend can be built anywhere;
/// calls must come from a thread outside an async runtime.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    id: String,
    timeout: Duration,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        let base_url = base_url.into().trim_end_matches('/').to_string();
        Self { id: format!("http:{base_url}"), base_url, timeout: DEFAULT_TIMEOUT }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn client(&self, timeout: Duration) -> Result<reqwest::blocking::Client, String> {
        reqwest::blocking::Client::builder()
            .timeout(timeout)
            .connect_timeout(PROBE_TIMEOUT)
            .build()
            .map_err(|e| e.to_string())
    }

    fn unreachable(&self, started: Instant, detail: String) -> HealthReport {
        HealthReport {
            backend_id: self.id.clone(),
            model: String::new(),
            status: BackendStatus::Unreachable,
            max_size: None,
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
            detail: Some(detail),
        }
    }
}

impl GenerationBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn probe(&self) -> HealthReport {
        let started = Instant::now();
        let client = match self.client(PROBE_TIMEOUT) {
            Ok(c) => c,
            Err(e) => return self.unreachable(started, e),
        };
        let resp = match client.get(format!("{}/health", self.base_url)).send() {
            Ok(r) => r,
            Err(e) => return self.unreachable(started, e.to_string()),
        };
        let latency_ms = started.elapsed().as_secs_f64() * 1e3;
        if !resp.status().is_success() {
            return HealthReport {
                backend_id: self.id.clone(),
                model: String::new(),
                status: BackendStatus::Unhealthy,
                max_size: None,
                latency_ms,
                detail: Some(format!("health endpoint returned {}", resp.status())),
            };
        }
        match resp.json::<HealthReport>() {
            Ok(remote) => HealthReport {
                backend_id: self.id.clone(),
                model: if remote.model.is_empty() { remote.backend_id } else { remote.model },
                status: remote.status,
                max_size: remote.max_size,
                latency_ms,
                detail: remote.detail,
            },
            Err(e) => HealthReport {
                backend_id: self.id.clone(),
                model: String::new(),
                status: BackendStatus::Unhealthy,
                max_size: None,
                latency_ms,
                detail: Some(format!("malformed health report: {e}")),
            },
        }
    }

    fn render(&self, input: &GenerationInput) -> Result<RgbImage, BackendError> {
        let client = self.client(self.timeout).map_err(BackendError::Unavailable)?;
        let json_part = |v: String| Part::text(v).mime_str("application/json").expect("static mime");
        let form = Form::new()
            .part("prompt", json_part(serde_json::to_string(&input.prompt).expect("prompt json")))
            .part(
                "layout",
                Part::bytes(input.layout_png.clone())
                    .file_name("layout.png")
                    .mime_str("image/png")
                    .expect("static mime"),
            )
            .part("params", json_part(serde_json::to_string(&input.params).expect("params json")));
        let resp = client.post(format!("{}/generate", self.base_url)).multipart(form).send().map_err(|e| {
            if e.is_timeout() || e.is_connect() {
                BackendError::Unavailable(e.to_string())
            } else {
                BackendError::Failed(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(match status {
                StatusCode::BAD_REQUEST | StatusCode::PAYLOAD_TOO_LARGE | StatusCode::UNPROCESSABLE_ENTITY => {
                    BackendError::Rejected(body)
                }
                StatusCode::SERVICE_UNAVAILABLE => BackendError::Unavailable(body),
                _ => BackendError::Failed(format!("{status}: {body}")),
            });
        }
        let bytes = resp.bytes().map_err(|e| BackendError::Failed(e.to_string()))?;
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| BackendError::Failed(format!("undecodable PNG from sidecar: {e}")))?;
        Ok(img.to_rgb8())
    }
}
