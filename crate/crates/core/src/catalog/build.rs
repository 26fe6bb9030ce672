use std::path::Path;

use super::{
    apply_background_removal, flag_scene_images, ingest_catalog, CatalogError, CatalogIndex, CategoryMap,
    MattingBackend, SceneDetector, DEFAULT_SCENE_THRESHOLD,
};
use crate::model::Warning;
use crate::retrieval::{index_embeddings, EmbeddingProvider, RetrievalError};

/// Knobs for [`build_catalog`]. `None` skips a cleaning pass.
pub struct BuildOptions<'a> {
    pub category_map: CategoryMap,
    pub scene_detector: Option<&'a dyn SceneDetector>,
    pub scene_threshold: f64,
    pub matting: Option<&'a dyn MattingBackend>,
}

impl Default for BuildOptions<'_> {
    fn default() -> Self {
        Self {
            category_map: CategoryMap::new(),
            scene_detector: None,
            scene_threshold: DEFAULT_SCENE_THRESHOLD,
            matting: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Ingest, clean and embed a catalog tree in one go.
pub fn build_catalog(
    root: &Path,
    store: &str,
    options: &BuildOptions<'_>,
    provider: &dyn EmbeddingProvider,
) -> Result<(CatalogIndex, Vec<Warning>), BuildError> {
    let (mut index, mut warnings) = ingest_catalog(root, store, &options.category_map)?;
    if let Some(detector) = options.scene_detector {
        let (flagged, w) = flag_scene_images(index, detector, options.scene_threshold);
        index = flagged;
        warnings.extend(w);
    }
    if let Some(matting) = options.matting {
        let (matted, w) = apply_background_removal(index, matting)?;
        index = matted;
        warnings.extend(w);
    }
    let (index, w) = index_embeddings(index, provider)?;
    warnings.extend(w);
    index.check_invariants()?;
    Ok((index, warnings))
}
