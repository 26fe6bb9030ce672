//! Layout-conditioned image generation behind a backend contract.
//!
//! A backend takes the prompt bundle, the rendered control layout and the
//! sampler parameters and returns an RGB image. [`StubBackend`] is a
//! deterministic model-free implementation; [`HttpBackend`] talks to a
//! diffusion sidecar over HTTP; [`sidecar`] serves any backend over the same
//! protocol.

mod http;
pub mod sidecar;
mod stub;

use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::layout::ControlLayout;
use crate::promptgen::PromptBundle;

pub use http::HttpBackend;
pub use stub::{decode_prompt_stamp, stub_palette_index, tint, StubBackend, STUB_BACKEND_ID, STUB_PALETTE};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);
pub const PROBE_TIMEOUT: Duration = Duration::from_secs(5);

/// Sampler knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub seed: u64,
    pub steps: u32,
    pub guidance_scale: f64,
    pub conditioning_scale: f64,
    /// (width, height) in pixels.
    pub output_size: (u32, u32),
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { seed: 0, steps: 30, guidance_scale: 7.5, conditioning_scale: 1.0, output_size: (512, 512) }
    }
}

impl GenerationParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.steps < 1 {
            return Err("steps must be at least 1".into());
        }
        if !(self.guidance_scale.is_finite() && self.guidance_scale >= 0.0) {
            return Err(format!("guidance_scale {} must be non-negative", self.guidance_scale));
        }
        if !(0.0..=2.0).contains(&self.conditioning_scale) {
            return Err(format!("conditioning_scale {} must lie in [0, 2]", self.conditioning_scale));
        }
        let (w, h) = self.output_size;
        if w == 0 || h == 0 || w % 8 != 0 || h % 8 != 0 {
            return Err(format!("output size {w}x{h} must be positive multiples of 8"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendStatus {
    Healthy,
    Unhealthy,
    Unreachable,
}

/// What a backend says about itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    pub backend_id: String,
    pub model: String,
    pub status: BackendStatus,
    pub max_size: Option<(u32, u32)>,
    pub latency_ms: f64,
    #[serde(default)]
    pub detail: Option<String>,
}

/// Everything a backend receives for one image.
#[derive(Debug, Clone)]
pub struct GenerationInput {
    pub prompt: PromptBundle,
    pub layout_png: Vec<u8>,
    pub layout_image: RgbImage,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend failed: {0}")]
    Failed(String),
}

pub trait GenerationBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    /// Health check. Must not panic; an unreachable backend is a report value.
    fn probe(&self) -> HealthReport;
    fn render(&self, input: &GenerationInput) -> Result<RgbImage, BackendError>;
}

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("backend {backend_id} is not healthy ({status:?}): {detail}")]
    Unavailable { backend_id: String, status: BackendStatus, detail: String },
    #[error("backend {backend_id} accepts at most {max:?} but {requested:?} was requested")]
    SizeRejected { backend_id: String, requested: (u32, u32), max: (u32, u32) },
    #[error("layout image is empty")]
    DegenerateLayout,
    #[error("backend {backend_id} timed out after {after_s:.0} s; retry later or raise the generation timeout")]
    Timeout { backend_id: String, after_s: f64 },
    #[error("backend {backend_id}: {source}")]
    Backend { backend_id: String, source: BackendError },
    #[error("backend {backend_id} broke its contract: {message}")]
    Contract { backend_id: String, message: String },
}

impl GenerationError {
    /// Whether retrying the same call later might succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            GenerationError::Timeout { .. }
                | GenerationError::Unavailable { .. }
                | GenerationError::Backend { source: BackendError::Unavailable(_), .. }
        )
    }
}

/// A generated interior and the inputs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDesign {
    pub image: RgbImage,
    pub prompt: PromptBundle,
    pub layout_hash: [u8; 32],
    pub params: GenerationParams,
    pub backend_id: String,
    pub wall_time_s: f64,
}

/// JSON record stored next to the design image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub prompt: PromptBundle,
    pub layout_hash: String,
    pub params: GenerationParams,
    pub backend_id: String,
    pub wall_time_s: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl GeneratedDesign {
    pub fn record(&self) -> DesignRecord {
        DesignRecord {
            prompt: self.prompt.clone(),
            layout_hash: hex::encode(self.layout_hash),
            params: self.params.clone(),
            backend_id: self.backend_id.clone(),
            wall_time_s: self.wall_time_s,
            image_width: self.image.width(),
            image_height: self.image.height(),
        }
    }
}

impl DesignRecord {
    /// True when `layout_png` is the layout this design was generated from.
    pub fn matches_layout(&self, layout_png: &[u8]) -> bool {
        self.layout_hash == crate::digest::sha256_hex(layout_png)
    }
}

/// Health check with the probe timeout applied even if the backend ignores it.
pub fn probe_backend(backend: &Arc<dyn GenerationBackend>) -> HealthReport {
    let (tx, rx) = mpsc::channel();
    let b = Arc::clone(backend);
    let started = Instant::now();
    std::thread::spawn(move || {
        let _ = tx.send(b.probe());
    });
    match rx.recv_timeout(PROBE_TIMEOUT) {
        Ok(report) => report,
        Err(_) => HealthReport {
            backend_id: backend.backend_id().to_string(),
            model: String::new(),
            status: BackendStatus::Unreachable,
            max_size: None,
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
            detail: Some("probe timed out".into()),
        },
    }
}

/// Generate one design, enforcing the backend contract and a timeout.
pub fn generate(
    prompt: &PromptBundle,
    layout: &ControlLayout,
    params: &GenerationParams,
    backend: &Arc<dyn GenerationBackend>,
    timeout: Duration,
) -> Result<GeneratedDesign, GenerationError> {
    params.validate().map_err(GenerationError::InvalidParams)?;
    if layout.image.width() == 0 || layout.image.height() == 0 {
        return Err(GenerationError::DegenerateLayout);
    }
    let backend_id = backend.backend_id().to_string();
    let health = probe_backend(backend);
    if health.status != BackendStatus::Healthy {
        return Err(GenerationError::Unavailable {
            backend_id,
            status: health.status,
            detail: health.detail.unwrap_or_default(),
        });
    }
    if let Some(max) = health.max_size {
        if params.output_size.0 > max.0 || params.output_size.1 > max.1 {
            return Err(GenerationError::SizeRejected { backend_id, requested: params.output_size, max });
        }
    }

    let layout_png = layout.png_bytes();
    let layout_hash = crate::digest::sha256(&layout_png);
    let input = GenerationInput {
        prompt: prompt.clone(),
        layout_png,
        layout_image: layout.image.clone(),
        params: params.clone(),
    };
    let started = Instant::now();
    let (tx, rx) = mpsc::channel();
    let worker = Arc::clone(backend);
    std::thread::spawn(move || {
        let _ = tx.send(worker.render(&input));
    });
    let image = match rx.recv_timeout(timeout) {
        Ok(Ok(image)) => image,
        Ok(Err(source)) => return Err(GenerationError::Backend { backend_id, source }),
        Err(mpsc::RecvTimeoutError::Timeout) => {
            return Err(GenerationError::Timeout { backend_id, after_s: timeout.as_secs_f64() })
        }
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            return Err(GenerationError::Backend {
                backend_id,
                source: BackendError::Failed("backend panicked".into()),
            })
        }
    };
    if image.dimensions() != params.output_size {
        return Err(GenerationError::Contract {
            backend_id,
            message: format!("returned {:?}, expected {:?}", image.dimensions(), params.output_size),
        });
    }
    Ok(GeneratedDesign {
        image,
        prompt: prompt.clone(),
        layout_hash,
        params: params.clone(),
        backend_id,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
