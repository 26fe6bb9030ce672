//! Furniture catalog: ingestion from an image tree, the two cleaning passes
//! (scene-image exclusion and background removal) and the on-disk archive.

mod archive;
mod build;
mod cleaning;
mod ingest;

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{EmbeddingVector, FurnitureAsset};

pub use archive::{load_index, persist_index, read_index, write_index, FormatError, FORMAT_VERSION};
pub use build::{build_catalog, BuildError, BuildOptions};
pub use cleaning::{
    apply_background_removal, apply_mask, flag_scene_images, remove_background, BorderFloodMatting,
    BorderUniformityDetector, ExclusionListDetector, MattingBackend, SceneDetector, DEFAULT_SCENE_THRESHOLD,
};
pub use ingest::{ingest_catalog, CategoryMap, TRANSPARENT_DIR};

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("no readable images under {0}")]
    EmptyCatalog(PathBuf),
    #[error("asset {asset_id}: mask is {mask_w}x{mask_h} but the image is {image_w}x{image_h}")]
    MaskMismatch { asset_id: String, image_w: u32, image_h: u32, mask_w: u32, mask_h: u32 },
    #[error("asset {asset_id}: {message}")]
    Backend { asset_id: String, message: String },
    #[error("catalog archive: {0}")]
    Format(#[from] FormatError),
    #[error("catalog index invariant violated: {0}")]
    Invariant(String),
    #[error("image error for {path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The queryable catalog: assets, their embeddings and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogIndex {
    pub store: String,
    pub root_path: PathBuf,
    pub assets: Vec<FurnitureAsset>,
    pub embeddings: BTreeMap<String, EmbeddingVector>,
    pub created_at: DateTime<Utc>,
    /// Set once the catalog has been embedded.
    pub provider_id: Option<String>,
}

impl CatalogIndex {
    pub fn asset(&self, asset_id: &str) -> Option<&FurnitureAsset> {
        self.assets.iter().find(|a| a.asset_id == asset_id)
    }

    pub fn active_assets(&self) -> impl Iterator<Item = &FurnitureAsset> {
        self.assets.iter().filter(|a| !a.excluded)
    }

    pub fn image_path(&self, asset: &FurnitureAsset) -> PathBuf {
        self.root_path.join(&asset.image_path)
    }

    /// Distinct categories with at least one usable asset, sorted.
    pub fn categories(&self) -> Vec<String> {
        let mut cats: Vec<String> = self.active_assets().map(|a| a.category.clone()).collect();
        cats.sort();
        cats.dedup();
        cats
    }

    pub fn dimension(&self) -> Option<usize> {
        self.embeddings.values().next().map(EmbeddingVector::dimension)
    }

    pub fn check_invariants(&self) -> Result<(), CatalogError> {
        let mut ids = std::collections::BTreeSet::new();
        for a in &self.assets {
            if !ids.insert(a.asset_id.as_str()) {
                return Err(CatalogError::Invariant(format!("duplicate asset_id {}", a.asset_id)));
            }
            if a.excluded == (a.exclusion_reason == crate::model::ExclusionReason::None) {
                return Err(CatalogError::Invariant(format!(
                    "asset {} has excluded={} with reason {:?}",
                    a.asset_id, a.excluded, a.exclusion_reason
                )));
            }
        }
        for id in self.embeddings.keys() {
            if !ids.contains(id.as_str()) {
                return Err(CatalogError::Invariant(format!("embedding for unknown asset {id}")));
            }
        }
        let dim = self.dimension();
        for (id, v) in &self.embeddings {
            if Some(&v.provider_id) != self.provider_id.as_ref() {
                return Err(CatalogError::Invariant(format!(
                    "embedding for {id} comes from provider {} but the index records {:?}",
                    v.provider_id, self.provider_id
                )));
            }
            if Some(v.dimension()) != dim {
                return Err(CatalogError::Invariant(format!("embedding for {id} has dimension {}", v.dimension())));
            }
        }
        if self.provider_id.is_some() {
            if let Some(a) = self.active_assets().find(|a| !self.embeddings.contains_key(&a.asset_id)) {
                return Err(CatalogError::Invariant(format!("active asset {} has no embedding", a.asset_id)));
            }
        }
        Ok(())
    }
}
