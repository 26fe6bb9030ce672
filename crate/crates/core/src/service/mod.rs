//! Durable job service: queue, resumable stage runner and REST API.
//!
//! A job walks `queued -> retrieving -> composing -> generating -> evaluating
//! -> done`. Each stage writes its artifacts to a content-addressed store and
//! commits them together with its state change, so after a crash a job resumes
//! at the first stage that did not commit.

pub mod api;
mod artifacts;
mod config;
mod job;
mod store;

use std::collections::{HashSet, VecDeque};
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::catalog::{load_index, CatalogIndex};
use crate::evaluation::{score_design, FixedClassifier, LabelClassifier, PaletteKeyedClassifier};
use crate::generation::{
    generate, probe_backend, DesignRecord, GeneratedDesign, GenerationBackend, GenerationError, GenerationParams,
    HealthReport, HttpBackend, StubBackend,
};
use crate::layout::{compose_layout, place_furniture, ControlLayout, FootprintTable, LayoutSidecar, UnplaceableItem};
use crate::model::{validate_request, DesignRequest, FurnitureSelection, LabelSets, ValidationReport, Warning};
use crate::promptgen::{PromptBuilder, PromptBundle};
use crate::retrieval::{select_furniture, EmbeddingProvider, StubEmbeddingProvider};

pub use artifacts::{ArtifactError, ArtifactStore};
pub use config::{BackendConfig, ClassifierConfig, ClassifiersConfig, ConfigError, ProviderConfig, ServiceConfig};
pub use job::{ArtifactKind, ArtifactRef, DesignJob, JobError, JobFilter, JobPage, JobState, StageWarning};
pub use store::{JobStore, StageCommit, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(ValidationReport),
    #[error("service not ready: {0}")]
    NotReady(String),
    #[error("job {0} not found")]
    UnknownJob(String),
    #[error("{0}")]
    UnknownStage(String),
    #[error("artifact {stage} of job {job_id} is not ready (job is {state})")]
    ArtifactNotReady { job_id: String, stage: ArtifactKind, state: JobState },
    #[error("job {job_id} ended {state} without a {stage} artifact")]
    ArtifactUnavailable { job_id: String, stage: ArtifactKind, state: JobState },
    #[error("{0}")]
    Setup(String),
}

/// Layout metadata stored next to the layout PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutMeta {
    #[serde(flatten)]
    pub sidecar: LayoutSidecar,
    pub unplaceable: Vec<UnplaceableItem>,
}

/// Pluggable parts of the pipeline.
#[derive(Clone)]
pub struct Components {
    pub provider: Arc<dyn EmbeddingProvider>,
    pub backends: Vec<Arc<dyn GenerationBackend>>,
    pub room_classifier: Arc<dyn LabelClassifier>,
    pub style_classifier: Arc<dyn LabelClassifier>,
}

fn classifier(id: &str, cfg: &ClassifierConfig, labels: &[String]) -> Result<Arc<dyn LabelClassifier>, ServiceError> {
    if labels.is_empty() {
        return Err(ServiceError::Setup(format!("{id}: empty label set")));
    }
    Ok(match cfg {
        ClassifierConfig::Palette { offset } => Arc::new(PaletteKeyedClassifier::new(id, labels, *offset)),
        ClassifierConfig::Fixed { label } => Arc::new(FixedClassifier::new(id, labels, label)),
    })
}

impl Components {
    /// Built-in components named by the configuration.
    pub fn from_config(config: &ServiceConfig, labels: &LabelSets) -> Result<Self, ServiceError> {
        let provider: Arc<dyn EmbeddingProvider> = match config.provider.kind.as_str() {
            "stub" => Arc::new(StubEmbeddingProvider::new(config.provider.dimension)),
            other => {
                return Err(ServiceError::Setup(format!(
                    "embedding provider {other:?} is not built in; inject it with JobService::with_components"
                )))
            }
        };
        let backends = config
            .backends
            .iter()
            .map(|b| -> Arc<dyn GenerationBackend> {
                match b {
                    BackendConfig::Stub { delay_ms } => {
                        Arc::new(StubBackend::with_delay(Duration::from_millis(*delay_ms)))
                    }
                    BackendConfig::Http { url } => {
                        Arc::new(HttpBackend::new(url).with_timeout(Duration::from_secs(config.generation_timeout_s)))
                    }
                }
            })
            .collect();
        Ok(Self {
            provider,
            backends,
            room_classifier: classifier("room-type", &config.classifiers.room_type, &labels.room_types)?,
            style_classifier: classifier("style", &config.classifiers.style, &labels.styles)?,
        })
    }
}

/// Backends handed out one job at a time.
struct BackendPool {
    backends: Vec<Arc<dyn GenerationBackend>>,
    free: Mutex<Vec<usize>>,
    cv: Condvar,
}

struct Lease<'a> {
    pool: &'a BackendPool,
    index: usize,
}

impl Drop for Lease<'_> {
    fn drop(&mut self) {
        self.pool.free.lock().unwrap_or_else(|p| p.into_inner()).push(self.index);
        self.pool.cv.notify_one();
    }
}

impl BackendPool {
    fn new(backends: Vec<Arc<dyn GenerationBackend>>) -> Self {
        let free = (0..backends.len()).rev().collect();
        Self { backends, free: Mutex::new(free), cv: Condvar::new() }
    }

    fn lease(&self) -> Lease<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            if let Some(index) = free.pop() {
                return Lease { pool: self, index };
            }
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSummary {
    pub store: String,
    pub assets: usize,
    pub active_assets: usize,
    pub categories: Vec<String>,
    pub provider_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceHealth {
    /// `ok` or `not_ready`.
    pub status: String,
    pub reason: Option<String>,
    pub catalog: Option<CatalogSummary>,
    pub provider_id: String,
    pub backends: Vec<HealthReport>,
    pub queue_depth: usize,
}

struct Inner {
    config: ServiceConfig,
    labels: LabelSets,
    footprints: FootprintTable,
    prompt_builder: PromptBuilder,
    store: JobStore,
    blobs: ArtifactStore,
    catalog: RwLock<Result<Arc<CatalogIndex>, String>>,
    components: Components,
    pool: BackendPool,
    queue: Mutex<VecDeque<String>>,
    queue_cv: Condvar,
    running: Mutex<HashSet<String>>,
    shutdown: AtomicBool,
}

/// Handle to the job service. Cheap to clone.
#[derive(Clone)]
pub struct JobService {
    inner: Arc<Inner>,
    workers: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

/// Why a stage failed.
struct StageFailure {
    kind: &'static str,
    message: String,
    retryable: bool,
}

impl StageFailure {
    fn new(kind: &'static str, e: impl std::fmt::Display) -> Self {
        Self { kind, message: e.to_string(), retryable: false }
    }
}

impl From<ServiceError> for StageFailure {
    fn from(e: ServiceError) -> Self {
        StageFailure::new("internal", e)
    }
}

impl From<GenerationError> for StageFailure {
    fn from(e: GenerationError) -> Self {
        Self { kind: "generation", retryable: e.is_retryable(), message: e.to_string() }
    }
}

fn stage_warnings(stage: JobState, warnings: Vec<Warning>) -> Vec<StageWarning> {
    warnings.into_iter().map(|w| StageWarning { stage, code: w.code, subject: w.subject, message: w.message }).collect()
}

/// Seed used when a request does not pin one.
pub fn derived_seed(job_id: &str) -> u64 {
    let h = crate::digest::sha256(job_id.as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

impl JobService {
    /// Open the store under `config.data_dir`, build the configured
    /// components and load the catalog if one is configured.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let labels = Self::labels_for(&config)?;
        let components = Components::from_config(&config, &labels)?;
        Self::with_components(config, components)
    }

    fn labels_for(config: &ServiceConfig) -> Result<LabelSets, ServiceError> {
        let mut labels = LabelSets::new(config.labels.room_types.clone(), config.labels.styles.clone());
        if let Some(dir) = &config.style_dataset_dir {
            labels.extend_styles_from_dir(dir)?;
        }
        Ok(labels)
    }

    pub fn with_components(config: ServiceConfig, components: Components) -> Result<Self, ServiceError> {
        config.validate()?;
        if components.backends.is_empty() {
            return Err(ServiceError::Setup("no generation backends".into()));
        }
        let labels = Self::labels_for(&config)?;
        std::fs::create_dir_all(&config.data_dir)?;
        let store = JobStore::open(&config.data_dir.join("jobs.sqlite"))?;
        let blobs = ArtifactStore::open(config.data_dir.join("artifacts"))?;
        let catalog = match &config.catalog_path {
            None => Err("no catalog configured".to_string()),
            Some(path) => load_index(path).map(Arc::new).map_err(|e| format!("catalog {}: {e}", path.display())),
        };
        let footprints = FootprintTable::default().with_overrides(&config.footprints);
        let mut prompt_builder = PromptBuilder::default();
        if let Some(neg) = &config.negative_prompt {
            prompt_builder.negative = neg.clone();
        }
        let pool = BackendPool::new(components.backends.clone());
        let service = Self {
            inner: Arc::new(Inner {
                config,
                labels,
                footprints,
                prompt_builder,
                store,
                blobs,
                catalog: RwLock::new(Err(String::new())),
                components,
                pool,
                queue: Mutex::new(VecDeque::new()),
                queue_cv: Condvar::new(),
                running: Mutex::new(HashSet::new()),
                shutdown: AtomicBool::new(false),
            }),
            workers: Arc::new(Mutex::new(Vec::new())),
        };
        match catalog {
            Ok(index) => service.set_catalog(index)?,
            Err(reason) => {
                tracing::warn!("{reason}");
                *service.inner.catalog.write().unwrap_or_else(|p| p.into_inner()) = Err(reason);
            }
        }
        Ok(service)
    }

    /// Install a catalog. Its embeddings must come from the configured provider.
    pub fn set_catalog(&self, index: Arc<CatalogIndex>) -> Result<(), ServiceError> {
        let provider = &self.inner.components.provider;
        let status = if index.provider_id.as_deref() != Some(provider.provider_id()) {
            Err(format!(
                "catalog embedded with {:?} but the service uses {}",
                index.provider_id,
                provider.provider_id()
            ))
        } else {
            Ok(index)
        };
        let result = status.as_ref().map(|_| ()).map_err(|r| ServiceError::NotReady(r.clone()));
        *self.inner.catalog.write().unwrap_or_else(|p| p.into_inner()) = status;
        result
    }

    pub fn catalog(&self) -> Result<Arc<CatalogIndex>, ServiceError> {
        self.inner.catalog.read().unwrap_or_else(|p| p.into_inner()).clone().map_err(ServiceError::NotReady)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn labels(&self) -> &LabelSets {
        &self.inner.labels
    }

    pub fn store(&self) -> &JobStore {
        &self.inner.store
    }

    /// Validate and enqueue a request. Returns the new job id.
    pub fn submit(&self, request: DesignRequest) -> Result<String, ServiceError> {
        let request = validate_request(request, &self.inner.labels).map_err(ServiceError::Invalid)?;
        self.catalog()?;
        let job_id = uuid::Uuid::new_v4().to_string();
        self.inner.store.insert_job(&job_id, &request)?;
        self.enqueue(job_id.clone());
        Ok(job_id)
    }

    fn enqueue(&self, job_id: String) {
        self.inner.queue.lock().unwrap_or_else(|p| p.into_inner()).push_back(job_id);
        self.inner.queue_cv.notify_one();
    }

    pub fn queue_depth(&self) -> usize {
        self.inner.queue.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn get_job(&self, job_id: &str) -> Result<DesignJob, ServiceError> {
        self.inner.store.get(job_id)?.ok_or_else(|| ServiceError::UnknownJob(job_id.to_string()))
    }

    /// One page (1-based) of jobs, newest first.
    pub fn list_jobs(
        &self,
        filter: &JobFilter,
        page: usize,
        page_size: Option<usize>,
    ) -> Result<JobPage, ServiceError> {
        let page = page.max(1);
        let page_size = page_size.unwrap_or(self.inner.config.page_size).clamp(1, 500);
        let (jobs, total) = self.inner.store.list(filter, (page - 1) * page_size, page_size)?;
        Ok(JobPage { jobs, page, page_size, total })
    }

    /// Bytes and media type of one stage artifact, re-verified against its digest.
    pub fn get_artifact(&self, job_id: &str, stage: &str) -> Result<(Vec<u8>, &'static str), ServiceError> {
        let kind: ArtifactKind = stage.parse().map_err(ServiceError::UnknownStage)?;
        let state = self.inner.store.state(job_id)?.ok_or_else(|| ServiceError::UnknownJob(job_id.to_string()))?;
        match self.inner.store.artifact(job_id, kind)? {
            Some(r) => Ok((self.inner.blobs.get(&r.digest)?, kind.media_type())),
            None if state.is_terminal() => {
                Err(ServiceError::ArtifactUnavailable { job_id: job_id.to_string(), stage: kind, state })
            }
            None => Err(ServiceError::ArtifactNotReady { job_id: job_id.to_string(), stage: kind, state }),
        }
    }

    /// Write every artifact of a job plus `job.json` into `dir`.
    pub fn export_job(&self, job_id: &str, dir: &Path) -> Result<DesignJob, ServiceError> {
        std::fs::create_dir_all(dir)?;
        let job = self.get_job(job_id)?;
        for (kind, r) in &job.artifacts {
            std::fs::write(dir.join(kind.file_name()), self.inner.blobs.get(&r.digest)?)?;
        }
        std::fs::write(dir.join("job.json"), serde_json::to_vec_pretty(&job).expect("job serializes"))?;
        Ok(job)
    }

    pub fn health(&self) -> ServiceHealth {
        let catalog = self.catalog();
        let backends = self.inner.components.backends.iter().map(probe_backend).collect();
        ServiceHealth {
            status: if catalog.is_ok() { "ok" } else { "not_ready" }.into(),
            reason: catalog.as_ref().err().map(|e| e.to_string()),
            catalog: catalog.ok().map(|c| CatalogSummary {
                store: c.store.clone(),
                assets: c.assets.len(),
                active_assets: c.active_assets().count(),
                categories: c.categories(),
                provider_id: c.provider_id.clone(),
            }),
            provider_id: self.inner.components.provider.provider_id().to_string(),
            backends,
            queue_depth: self.queue_depth(),
        }
    }

    /// Re-queue every job that was not done or failed when the service last stopped.
    pub fn recover(&self) -> Result<usize, ServiceError> {
        let unfinished = self.inner.store.unfinished()?;
        let n = unfinished.len();
        for (job_id, state) in unfinished {
            tracing::info!(job_id, %state, "resuming job");
            self.enqueue(job_id);
        }
        Ok(n)
    }

    /// Recover unfinished jobs and start `config.workers` worker threads.
    pub fn start(&self) -> Result<usize, ServiceError> {
        let recovered = self.recover()?;
        let mut workers = self.workers.lock().unwrap_or_else(|p| p.into_inner());
        for i in 0..self.inner.config.workers {
            let svc = self.clone();
            let handle =
                std::thread::Builder::new().name(format!("decomind-worker-{i}")).spawn(move || svc.worker_loop())?;
            workers.push(handle);
        }
        Ok(recovered)
    }

    /// Stop the workers after their current job.
    pub fn shutdown(&self) {
        self.inner.shutdown.store(true, Ordering::SeqCst);
        self.inner.queue_cv.notify_all();
        let handles: Vec<_> = self.workers.lock().unwrap_or_else(|p| p.into_inner()).drain(..).collect();
        for h in handles {
            let _ = h.join();
        }
    }

    fn worker_loop(&self) {
        loop {
            let job_id = {
                let mut q = self.inner.queue.lock().unwrap_or_else(|p| p.into_inner());
                loop {
                    if self.inner.shutdown.load(Ordering::SeqCst) {
                        return;
                    }
                    if let Some(id) = q.pop_front() {
                        break id;
                    }
                    q = self
                        .inner
                        .queue_cv
                        .wait_timeout(q, Duration::from_millis(500))
                        .unwrap_or_else(|p| p.into_inner())
                        .0;
                }
            };
            if let Err(e) = self.run_job(&job_id) {
                tracing::error!(job_id, "job runner: {e}");
            }
        }
    }

    /// Run a job to a terminal state on the calling thread.
    pub fn run_job(&self, job_id: &str) -> Result<DesignJob, ServiceError> {
        if !self.inner.running.lock().unwrap_or_else(|p| p.into_inner()).insert(job_id.to_string()) {
            return self.get_job(job_id);
        }
        let result = (|| loop {
            let state = self.step(job_id)?;
            if state.is_terminal() || self.inner.shutdown.load(Ordering::SeqCst) {
                return self.get_job(job_id);
            }
        })();
        self.inner.running.lock().unwrap_or_else(|p| p.into_inner()).remove(job_id);
        result
    }

    /// Run the job's current stage once and return the state it ends in.
    /// A failing stage moves the job to `failed` with a structured error.
    pub fn step(&self, job_id: &str) -> Result<JobState, ServiceError> {
        let job = self.get_job(job_id)?;
        let from = job.state;
        if from.is_terminal() {
            return Ok(from);
        }
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| self.run_stage(&job)))
            .unwrap_or_else(|_| Err(StageFailure::new("panic", format!("{from} stage panicked"))));
        match outcome {
            Ok(()) => {}
            Err(f) => {
                tracing::warn!(job_id, stage = %from, kind = f.kind, "{}", f.message);
                let error =
                    JobError { stage: from, kind: f.kind.to_string(), message: f.message, retryable: f.retryable };
                match self.inner.store.fail(job_id, from, &error) {
                    Ok(()) | Err(StoreError::Conflict { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(self.inner.store.state(job_id)?.unwrap_or(JobState::Failed))
    }

    fn put_json<T: Serialize>(
        &self,
        kind: ArtifactKind,
        value: &T,
    ) -> Result<(ArtifactKind, String, u64), ServiceError> {
        self.put_bytes(kind, &serde_json::to_vec(value).expect("artifact serializes"))
    }

    fn put_bytes(&self, kind: ArtifactKind, bytes: &[u8]) -> Result<(ArtifactKind, String, u64), ServiceError> {
        Ok((kind, self.inner.blobs.put(bytes)?, bytes.len() as u64))
    }

    fn load(&self, job: &DesignJob, kind: ArtifactKind) -> Result<Vec<u8>, ServiceError> {
        let r = job.artifacts.get(&kind).ok_or_else(|| ServiceError::ArtifactUnavailable {
            job_id: job.job_id.clone(),
            stage: kind,
            state: job.state,
        })?;
        Ok(self.inner.blobs.get(&r.digest)?)
    }

    fn load_json<T: for<'de> Deserialize<'de>>(&self, job: &DesignJob, kind: ArtifactKind) -> Result<T, StageFailure> {
        let bytes = self.load(job, kind)?;
        serde_json::from_slice(&bytes).map_err(|e| StageFailure::new("internal", format!("{kind} artifact: {e}")))
    }

    fn load_png(&self, job: &DesignJob, kind: ArtifactKind) -> Result<image::RgbImage, StageFailure> {
        let bytes = self.load(job, kind)?;
        image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map(|i| i.to_rgb8())
            .map_err(|e| StageFailure::new("internal", format!("{kind} artifact: {e}")))
    }

    fn advance(&self, job: &DesignJob, commit: StageCommit<'_>) -> Result<(), StageFailure> {
        let to = job.state.next().expect("non-terminal state has a successor");
        match self.inner.store.advance(&job.job_id, job.state, to, commit) {
            Ok(()) | Err(StoreError::Conflict { .. }) => Ok(()),
            Err(e) => Err(StageFailure::new("internal", e)),
        }
    }

    fn run_stage(&self, job: &DesignJob) -> Result<(), StageFailure> {
        let req = &job.request;
        match job.state {
            JobState::Queued => self.advance(job, StageCommit::default()),
            JobState::Retrieving => {
                let catalog = self
                    .catalog()
                    .map_err(|e| StageFailure { retryable: true, ..StageFailure::new("not_ready", e) })?;
                let selection = select_furniture(req, &catalog, self.inner.components.provider.as_ref())
                    .map_err(|e| StageFailure::new("retrieval", e))?;
                let warnings = selection
                    .empty_categories()
                    .into_iter()
                    .map(|c| {
                        Warning::new(
                            "empty_category",
                            c,
                            format!("no active {c} assets in the {} catalog", catalog.store),
                        )
                    })
                    .collect();
                let artifacts = vec![self.put_json(ArtifactKind::Selection, &selection)?];
                self.advance(
                    job,
                    StageCommit { artifacts, warnings: stage_warnings(job.state, warnings), report: None },
                )
            }
            JobState::Composing => {
                let selection: FurnitureSelection = self.load_json(job, ArtifactKind::Selection)?;
                let placed = place_furniture(req, &selection, &self.inner.footprints);
                let layout = compose_layout(req, &placed.placements, self.inner.config.pixels_per_m)
                    .map_err(|e| StageFailure::new("layout", e))?;
                let (prompt, prompt_warnings) = self.inner.prompt_builder.build(req, &selection);
                let meta = LayoutMeta { sidecar: layout.sidecar(), unplaceable: placed.unplaceable };
                let mut warnings = placed.warnings;
                warnings.extend(prompt_warnings);
                let artifacts = vec![
                    self.put_bytes(ArtifactKind::Layout, &layout.png_bytes())?,
                    self.put_json(ArtifactKind::LayoutMeta, &meta)?,
                    self.put_json(ArtifactKind::Prompt, &prompt)?,
                ];
                self.advance(
                    job,
                    StageCommit { artifacts, warnings: stage_warnings(job.state, warnings), report: None },
                )
            }
            JobState::Generating => {
                let prompt: PromptBundle = self.load_json(job, ArtifactKind::Prompt)?;
                let meta: LayoutMeta = self.load_json(job, ArtifactKind::LayoutMeta)?;
                let layout = ControlLayout {
                    image: self.load_png(job, ArtifactKind::Layout)?,
                    pixels_per_m: meta.sidecar.pixels_per_m,
                    placements: meta.sidecar.placements,
                    legend: meta.sidecar.legend,
                };
                let params = GenerationParams {
                    seed: req.seed.unwrap_or_else(|| derived_seed(&job.job_id)),
                    ..self.inner.config.generation.clone()
                };
                let timeout = Duration::from_secs(self.inner.config.generation_timeout_s);
                let design = {
                    let lease = self.inner.pool.lease();
                    generate(&prompt, &layout, &params, &self.inner.pool.backends[lease.index], timeout)?
                };
                let artifacts = vec![
                    self.put_bytes(ArtifactKind::Design, &crate::layout::encode_png(&design.image))?,
                    self.put_json(ArtifactKind::DesignRecord, &design.record())?,
                ];
                self.advance(job, StageCommit { artifacts, ..Default::default() })
            }
            JobState::Evaluating => {
                let record: DesignRecord = self.load_json(job, ArtifactKind::DesignRecord)?;
                let mut layout_hash = [0u8; 32];
                hex::decode_to_slice(&record.layout_hash, &mut layout_hash)
                    .map_err(|e| StageFailure::new("internal", format!("design record layout hash: {e}")))?;
                let design = GeneratedDesign {
                    image: self.load_png(job, ArtifactKind::Design)?,
                    prompt: record.prompt,
                    layout_hash,
                    params: record.params,
                    backend_id: record.backend_id,
                    wall_time_s: record.wall_time_s,
                };
                let c = &self.inner.components;
                let report = score_design(
                    req,
                    &design,
                    c.room_classifier.as_ref(),
                    c.style_classifier.as_ref(),
                    &self.inner.labels,
                )
                .map_err(|e| StageFailure::new("evaluation", e))?;
                let artifacts = vec![
                    self.put_json(ArtifactKind::Report, &report)?,
                    self.put_json(ArtifactKind::Warnings, &job.warnings)?,
                ];
                self.advance(job, StageCommit { artifacts, warnings: Vec::new(), report: Some(&report) })
            }
            JobState::Done | JobState::Failed => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ingest_catalog, persist_index, CategoryMap};
    use crate::retrieval::index_embeddings;
    use image::{Rgb, RgbImage};

    pub(crate) fn fixture_catalog(dir: &Path) -> std::path::PathBuf {
        let root = dir.join("images");
        for (cat, n) in [("bed", 3), ("wardrobe", 2), ("desk", 1)] {
            std::fs::create_dir_all(root.join(cat)).unwrap();
            for i in 0..n {
                let mut img = RgbImage::from_pixel(16, 16, Rgb([255, 255, 255]));
                img.put_pixel(8, 8, Rgb([i as u8 * 40, 10, 200]));
                img.save(root.join(cat).join(format!("{cat}{i}.png"))).unwrap();
            }
        }
        let (index, _) = ingest_catalog(&root, "ikea", &CategoryMap::new()).unwrap();
        let (index, _) = index_embeddings(index, &StubEmbeddingProvider::default()).unwrap();
        let path = dir.join("catalog.dcm");
        persist_index(&index, &path).unwrap();
        path
    }

    fn config(dir: &Path) -> ServiceConfig {
        ServiceConfig {
            catalog_path: Some(fixture_catalog(dir)),
            data_dir: dir.join("data"),
            generation: GenerationParams { output_size: (128, 128), ..Default::default() },
            ..Default::default()
        }
    }

    fn request() -> DesignRequest {
        DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "wardrobe"]).with_seed(4)
    }

    #[test]
    fn job_runs_to_done_with_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let svc = JobService::open(config(dir.path())).unwrap();
        let id = svc.submit(request()).unwrap();
        let job = svc.run_job(&id).unwrap();
        assert_eq!(job.state, JobState::Done, "{:?}", job.error);
        for kind in ArtifactKind::REQUIRED {
            assert!(job.artifacts.contains_key(&kind), "{kind}");
        }
        let report = job.report.unwrap();
        assert_eq!(report.final_score, report.recompute_score(&job.request));
        let (png, media) = svc.get_artifact(&id, "design").unwrap();
        assert_eq!(media, "image/png");
        assert_eq!(image::load_from_memory(&png).unwrap().width(), 128);
        let timestamps: Vec<_> = job.timestamps.values().collect();
        assert!(timestamps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn invalid_requests_are_rejected_with_every_field() {
        let dir = tempfile::tempdir().unwrap();
        let svc = JobService::open(config(dir.path())).unwrap();
        let mut req = request();
        req.room_width_m = -1.0;
        req.style = "gothic".into();
        match svc.submit(req) {
            Err(ServiceError::Invalid(report)) => {
                assert!(report.names_field("room_width_m"));
                assert!(report.names_field("style"));
            }
            other => panic!("{:?}", other.map(|_| ())),
        }
        assert_eq!(svc.list_jobs(&JobFilter::default(), 1, None).unwrap().total, 0);
    }

    #[test]
    fn no_catalog_means_not_ready() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ServiceConfig { catalog_path: None, data_dir: dir.path().join("data"), ..Default::default() };
        let svc = JobService::open(cfg).unwrap();
        assert!(matches!(svc.submit(request()), Err(ServiceError::NotReady(_))));
        assert_eq!(svc.health().status, "not_ready");
    }

    #[test]
    fn artifacts_of_unreached_stages_are_not_ready() {
        let dir = tempfile::tempdir().unwrap();
        let svc = JobService::open(config(dir.path())).unwrap();
        let id = svc.submit(request()).unwrap();
        assert!(matches!(svc.get_artifact(&id, "design"), Err(ServiceError::ArtifactNotReady { .. })));
        assert!(matches!(svc.get_artifact(&id, "bogus"), Err(ServiceError::UnknownStage(_))));
        assert!(matches!(svc.get_artifact("nope", "design"), Err(ServiceError::UnknownJob(_))));
    }

    #[test]
    fn category_without_assets_completes_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let svc = JobService::open(config(dir.path())).unwrap();
        let req = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "sofa"]).with_seed(1);
        let id = svc.submit(req).unwrap();
        let job = svc.run_job(&id).unwrap();
        assert_eq!(job.state, JobState::Done);
        assert!(job.warnings.iter().any(|w| w.code == "empty_category" && w.subject == "sofa"));
        let (bytes, _) = svc.get_artifact(&id, "warnings").unwrap();
        let stored: Vec<StageWarning> = serde_json::from_slice(&bytes).unwrap();
        assert!(stored.iter().any(|w| w.subject == "sofa"));
    }

    #[test]
    fn generation_failure_is_structured_and_keeps_earlier_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path());
        cfg.backends = vec![BackendConfig::Http { url: "http://127.0.0.1:9".into() }];
        let svc = JobService::open(cfg).unwrap();
        let id = svc.submit(request()).unwrap();
        let job = svc.run_job(&id).unwrap();
        assert_eq!(job.state, JobState::Failed);
        let err = job.error.unwrap();
        assert_eq!(err.stage, JobState::Generating);
        assert_eq!(err.kind, "generation");
        assert!(err.retryable);
        assert!(job.artifacts.contains_key(&ArtifactKind::Layout));
        assert!(matches!(svc.get_artifact(&id, "design"), Err(ServiceError::ArtifactUnavailable { .. })));
    }

    #[test]
    fn interrupted_job_resumes_at_first_uncommitted_stage() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let svc = JobService::open(config(dir.path())).unwrap();
            let id = svc.submit(request()).unwrap();
            for _ in 0..3 {
                svc.step(&id).unwrap();
            }
            assert_eq!(svc.get_job(&id).unwrap().state, JobState::Generating);
            id
        };
        let svc = JobService::open(config(dir.path())).unwrap();
        let before = svc.get_job(&id).unwrap();
        assert_eq!(svc.recover().unwrap(), 1);
        let job = svc.run_job(&id).unwrap();
        assert_eq!(job.state, JobState::Done);
        assert_eq!(job.artifacts[&ArtifactKind::Layout], before.artifacts[&ArtifactKind::Layout]);
        for state in JobState::ALL.into_iter().filter(|s| *s != JobState::Failed) {
            assert_eq!(svc.store().transition_count(&id, state).unwrap(), 1, "{state}");
        }
    }

    #[test]
    fn workers_drain_the_queue() {
        let dir = tempfile::tempdir().unwrap();
        let svc = JobService::open(config(dir.path())).unwrap();
        svc.start().unwrap();
        let ids: Vec<_> = (0..4).map(|i| svc.submit(request().with_seed(i)).unwrap()).collect();
        let deadline = std::time::Instant::now() + Duration::from_secs(30);
        while ids.iter().any(|id| !svc.get_job(id).unwrap().state.is_terminal()) {
            assert!(std::time::Instant::now() < deadline, "jobs did not finish");
            std::thread::sleep(Duration::from_millis(20));
        }
        svc.shutdown();
        for id in &ids {
            let job = svc.get_job(id).unwrap();
            assert_eq!(job.state, JobState::Done, "{:?}", job.error);
        }
        let page = svc.list_jobs(&JobFilter { state: Some(JobState::Done), ..Default::default() }, 1, Some(3)).unwrap();
        assert_eq!(page.total, 4);
        assert_eq!(page.jobs.len(), 3);
    }

    #[test]
    fn derived_seed_is_stable() {
        assert_eq!(derived_seed("abc"), derived_seed("abc"));
        assert_ne!(derived_seed("abc"), derived_seed("abd"));
    }
}
