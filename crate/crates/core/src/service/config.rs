use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::generation::GenerationParams;
use crate::layout::{Footprint, DEFAULT_PIXELS_PER_M};
use crate::model::LabelSets;
use crate::retrieval::StubEmbeddingProvider;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment override {key}={value:?}: {message}")]
    Env { key: String, value: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Only `stub` is built in; other providers are injected through the library.
    pub kind: String,
    pub dimension: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self { kind: "stub".into(), dimension: StubEmbeddingProvider::DEFAULT_DIMENSION }
    }
}

/// One generation backend: the built-in stub or an HTTP sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Stub {
        #[serde(default)]
        delay_ms: u64,
    },
    Http {
        url: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierConfig {
    /// Reads the stub backend's tint; `offset` rotates the label mapping.
    Palette {
        #[serde(default)]
        offset: usize,
    },
    /// Always predicts `label`.
    Fixed { label: String },
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Palette { offset: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifiersConfig {
    pub room_type: ClassifierConfig,
    pub style: ClassifierConfig,
}

/// Service configuration, read from TOML with `DECOMIND_*` environment overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub catalog_path: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub listen: String,
    pub workers: usize,
    pub provider: ProviderConfig,
    pub backends: Vec<BackendConfig>,
    pub classifiers: ClassifiersConfig,
    pub labels: LabelSets,
    /// Each subdirectory name becomes a style label.
    pub style_dataset_dir: Option<PathBuf>,
    pub footprints: BTreeMap<String, Footprint>,
    pub pixels_per_m: u32,
    pub generation: GenerationParams,
    pub generation_timeout_s: u64,
    pub negative_prompt: Option<String>,
    pub page_size: usize,
    /// Static files served at `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            catalog_path: None,
            data_dir: PathBuf::from("decomind-data"),
            listen: "127.0.0.1:8080".into(),
            workers: 2,
            provider: ProviderConfig::default(),
            backends: vec![BackendConfig::Stub { delay_ms: 0 }],
            classifiers: ClassifiersConfig::default(),
            labels: LabelSets::default(),
            style_dataset_dir: None,
            footprints: BTreeMap::new(),
            pixels_per_m: DEFAULT_PIXELS_PER_M,
            generation: GenerationParams::default(),
            generation_timeout_s: crate::generation::DEFAULT_TIMEOUT.as_secs(),
            negative_prompt: None,
            page_size: 20,
            ui_dir: None,
        }
    }
}

fn env_parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Env { key: key.into(), value: value.into(), message: e.to_string() })
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ServiceConfig =
            toml::from_str(text).map_err(|source| ConfigError::Parse { path: origin.to_path_buf(), source })?;
        cfg.resolve_relative_to(origin.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Read a TOML file, apply environment overrides and validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        cfg.apply_env(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Paths in a config file are relative to the file.
    fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        for p in [&mut self.catalog_path, &mut self.style_dataset_dir, &mut self.ui_dir].into_iter().flatten() {
            fix(p);
        }
    }

    /// Apply `DECOMIND_*` overrides from `vars`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix("DECOMIND_") else { continue };
            match name {
                "CATALOG_PATH" => self.catalog_path = Some(value.into()),
                "DATA_DIR" => self.data_dir = value.into(),
                "LISTEN" => self.listen = value,
                "WORKERS" => self.workers = env_parse(&key, &value)?,
                "PIXELS_PER_M" => self.pixels_per_m = env_parse(&key, &value)?,
                "GENERATION_TIMEOUT_S" => self.generation_timeout_s = env_parse(&key, &value)?,
                "PROVIDER_DIMENSION" => self.provider.dimension = env_parse(&key, &value)?,
                "BACKEND_URL" => self.backends = vec![BackendConfig::Http { url: value }],
                "STUB_DELAY_MS" => self.backends = vec![BackendConfig::Stub { delay_ms: env_parse(&key, &value)? }],
                "UI_DIR" => self.ui_dir = Some(value.into()),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.backends.is_empty() {
            return Err(ConfigError::Invalid("at least one generation backend is required".into()));
        }
        if self.page_size == 0 {
            return Err(ConfigError::Invalid("page_size must be positive".into()));
        }
        if self.pixels_per_m == 0 {
            return Err(ConfigError::Invalid("pixels_per_m must be positive".into()));
        }
        if self.generation_timeout_s == 0 {
            return Err(ConfigError::Invalid("generation_timeout_s must be positive".into()));
        }
        self.generation.validate().map_err(ConfigError::Invalid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_defaults_and_relative_paths() {
        let text = r#"
            catalog_path = "catalog.dcm"
            workers = 3
            [[backends]]
            kind = "http"
            url = "http://127.0.0.1:9000"
            [classifiers.style]
            kind = "fixed"
            label = "modern"
            [generation]
            steps = 10
        "#;
        let cfg = ServiceConfig::from_toml_str(text, Path::new("/etc/decomind/service.toml")).unwrap();
        assert_eq!(cfg.catalog_path.as_deref(), Some(Path::new("/etc/decomind/catalog.dcm")));
        assert_eq!(cfg.data_dir, Path::new("/etc/decomind/decomind-data"));
        assert_eq!(cfg.workers, 3);
        assert_eq!(cfg.backends, vec![BackendConfig::Http { url: "http://127.0.0.1:9000".into() }]);
        assert_eq!(cfg.classifiers.style, ClassifierConfig::Fixed { label: "modern".into() });
        assert_eq!(cfg.classifiers.room_type, ClassifierConfig::Palette { offset: 0 });
        assert_eq!(cfg.generation.steps, 10);
        assert_eq!(cfg.generation.output_size, (512, 512));
        cfg.validate().unwrap();
    }

    #[test]
    fn env_overrides_win() {
        let mut cfg = ServiceConfig::default();
        cfg.apply_env([
            ("DECOMIND_WORKERS".to_string(), "7".to_string()),
            ("DECOMIND_STUB_DELAY_MS".to_string(), "250".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ])
        .unwrap();
        assert_eq!(cfg.workers, 7);
        assert_eq!(cfg.backends, vec![BackendConfig::Stub { delay_ms: 250 }]);
        let err = cfg.apply_env([("DECOMIND_WORKERS".to_string(), "many".to_string())]).unwrap_err();
        assert!(err.to_string().contains("DECOMIND_WORKERS"));
    }

    #[test]
    fn invalid_values_rejected() {
        let cfg = ServiceConfig { workers: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ServiceConfig { backends: vec![], ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
