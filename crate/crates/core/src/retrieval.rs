//! Text-to-image furniture retrieval over a shared embedding space.
//!
//! Catalog images are embedded once with [`index_embeddings`]. At request
//! time each category becomes a short text query, is embedded with the same
//! provider, and the category's assets are ranked by dot product.

use image::DynamicImage;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::catalog::CatalogIndex;
use crate::digest::sha256;
use crate::model::{
    normalize_label, sort_picks, spaced_label, DesignRequest, EmbeddingVector, ExclusionReason, FurnitureSelection,
    Pick, Warning,
};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("category {0:?} is not part of the request")]
    UnknownCategory(String),
    #[error("query embedded by {query} but the index was embedded by {index:?}")]
    ProviderMismatch { query: String, index: Option<String> },
    #[error("query has dimension {query}, index has {index}")]
    DimensionMismatch { query: usize, index: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("catalog has no active assets to embed")]
    NoActiveAssets,
    #[error("embedding provider failed on {failed} of {attempted} assets")]
    ProviderFailureRate { failed: usize, attempted: usize },
    #[error("embedding provider {provider}: {message}")]
    Provider { provider: String, message: String },
}

/// A dual-encoder: text and images map into one unit-norm space.
pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, String>;
    fn embed_image(&self, image: &DynamicImage) -> Result<EmbeddingVector, String>;
}

/// Deterministic provider for tests and model-free runs: a SHA-256 of the
/// input seeds a ChaCha stream of normal samples, which is normalized.
///
/// Identical inputs always map to identical vectors; unrelated inputs map to
/// effectively random directions.
#[derive(Debug, Clone)]
pub struct StubEmbeddingProvider {
    id: String,
    dimension: usize,
}

impl StubEmbeddingProvider {
    pub const DEFAULT_DIMENSION: usize = 64;

    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { id: format!("stub-hash-v1-d{dimension}"), dimension }
    }

    fn vector_for(&self, domain: &[u8], payload: &[u8]) -> Result<EmbeddingVector, String> {
        let mut bytes = Vec::with_capacity(domain.len() + payload.len());
        bytes.extend_from_slice(domain);
        bytes.extend_from_slice(payload);
        let mut rng = ChaCha20Rng::from_seed(sha256(&bytes));
        let raw: Vec<f64> = (0..self.dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
        EmbeddingVector::normalized(&raw, self.id.clone()).map_err(|e| e.to_string())
    }
}

impl Default for StubEmbeddingProvider {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

impl EmbeddingProvider for StubEmbeddingProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, String> {
        self.vector_for(b"text\0", text.as_bytes())
    }

    fn embed_image(&self, image: &DynamicImage) -> Result<EmbeddingVector, String> {
        let rgba = image.to_rgba8();
        let mut payload = Vec::with_capacity(8 + rgba.as_raw().len());
        payload.extend_from_slice(&rgba.width().to_le_bytes());
        payload.extend_from_slice(&rgba.height().to_le_bytes());
        payload.extend_from_slice(rgba.as_raw());
        self.vector_for(b"image\0", &payload)
    }
}

/// The retrieval query for one requested category:
/// `"a {style} {category} for a {room_type}"` in spaced lower-case words.
pub fn build_query(request: &DesignRequest, category: &str) -> Result<String, RetrievalError> {
    let wanted = normalize_label(category);
    if !request.furniture_categories.iter().any(|c| normalize_label(c) == wanted) {
        return Err(RetrievalError::UnknownCategory(category.to_string()));
    }
    Ok(format!(
        "a {} {} for a {}",
        spaced_label(&request.style),
        spaced_label(&wanted),
        spaced_label(&request.room_type)
    ))
}

fn checked_vector(
    v: Result<EmbeddingVector, String>,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingVector, String> {
    let v = v?;
    if v.provider_id != provider.provider_id() {
        return Err(format!("vector tagged {} instead of {}", v.provider_id, provider.provider_id()));
    }
    if v.dimension() != provider.dimension() {
        return Err(format!("vector has dimension {} instead of {}", v.dimension(), provider.dimension()));
    }
    if (v.norm() - 1.0).abs() > crate::model::UNIT_NORM_TOLERANCE {
        return Err(format!("vector norm {} is not 1", v.norm()));
    }
    Ok(v)
}

/// Embed every active asset image. Assets whose image cannot be read or
/// embedded are excluded as low quality; more than half failing is fatal.
/// Any embeddings from a previous provider are replaced.
pub fn index_embeddings(
    mut index: CatalogIndex,
    provider: &dyn EmbeddingProvider,
) -> Result<(CatalogIndex, Vec<Warning>), RetrievalError> {
    let attempted = index.active_assets().count();
    if attempted == 0 {
        return Err(RetrievalError::NoActiveAssets);
    }
    index.embeddings.clear();
    let root = index.root_path.clone();
    let mut warnings = Vec::new();
    let mut failed = 0usize;
    for asset in index.assets.iter_mut().filter(|a| !a.excluded) {
        let result = image::open(root.join(&asset.image_path))
            .map_err(|e| e.to_string())
            .and_then(|img| checked_vector(provider.embed_image(&img), provider));
        match result {
            Ok(v) => {
                index.embeddings.insert(asset.asset_id.clone(), v);
            }
            Err(message) => {
                failed += 1;
                warnings.push(Warning::new("embedding_failed", &asset.asset_id, message));
                asset.exclude(ExclusionReason::LowQuality);
            }
        }
    }
    if failed * 2 > attempted {
        return Err(RetrievalError::ProviderFailureRate { failed, attempted });
    }
    index.provider_id = Some(provider.provider_id().to_string());
    Ok((index, warnings))
}

/// Top-`k` active assets of `category` by similarity to `query`, ties broken
/// by ascending asset id.
pub fn rank_assets(
    query: &EmbeddingVector,
    index: &CatalogIndex,
    category: &str,
    k: usize,
) -> Result<Vec<Pick>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if index.provider_id.as_deref() != Some(query.provider_id.as_str()) {
        return Err(RetrievalError::ProviderMismatch {
            query: query.provider_id.clone(),
            index: index.provider_id.clone(),
        });
    }
    if let Some(dim) = index.dimension() {
        if dim != query.dimension() {
            return Err(RetrievalError::DimensionMismatch { query: query.dimension(), index: dim });
        }
    }
    let wanted = normalize_label(category);
    let mut picks: Vec<Pick> = index
        .active_assets()
        .filter(|a| normalize_label(&a.category) == wanted)
        .filter_map(|a| {
            index
                .embeddings
                .get(&a.asset_id)
                .map(|v| Pick { asset_id: a.asset_id.clone(), similarity_score: query.dot(v) })
        })
        .collect();
    sort_picks(&mut picks);
    picks.truncate(k);
    Ok(picks)
}

/// Retrieve `items_per_category` assets for every requested category. Every
/// category appears as a key, with an empty list when nothing matches.
pub fn select_furniture(
    request: &DesignRequest,
    index: &CatalogIndex,
    provider: &dyn EmbeddingProvider,
) -> Result<FurnitureSelection, RetrievalError> {
    let mut selection = FurnitureSelection::default();
    for category in &request.furniture_categories {
        let query = build_query(request, category)?;
        let vector = checked_vector(provider.embed_text(&query), provider)
            .map_err(|message| RetrievalError::Provider { provider: provider.provider_id().to_string(), message })?;
        let picks = rank_assets(&vector, index, category, request.items_per_category.max(1) as usize)?;
        selection.picks.insert(normalize_label(category), picks);
    }
    Ok(selection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ingest_catalog, CategoryMap};
    use image::{Rgb, RgbImage};

    fn request() -> DesignRequest {
        DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "wardrobe"])
    }

    #[test]
    fn query_template() {
        assert_eq!(build_query(&request(), "bed").unwrap(), "a modern bed for a bedroom");
        let r = DesignRequest::new("dining_room", "minimalist", 4.0, 3.0, &["dining_table"]);
        assert_eq!(build_query(&r, "dining_table").unwrap(), "a minimalist dining table for a dining room");
        assert_eq!(build_query(&request(), "bed").unwrap(), build_query(&request(), "bed").unwrap());
        assert!(matches!(build_query(&request(), "sofa"), Err(RetrievalError::UnknownCategory(_))));
    }

    #[test]
    fn stub_is_deterministic_and_unit() {
        let p = StubEmbeddingProvider::default();
        let a = p.embed_text("a modern bed for a bedroom").unwrap();
        assert_eq!(a, p.embed_text("a modern bed for a bedroom").unwrap());
        assert_ne!(a, p.embed_text("a classic bed for a bedroom").unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-6);
        let img = DynamicImage::ImageRgb8(RgbImage::from_pixel(3, 3, Rgb([1, 2, 3])));
        assert_eq!(p.embed_image(&img).unwrap().dimension(), 64);
    }

    fn fixture(dir: &std::path::Path, files: &[&str]) -> CatalogIndex {
        for (i, f) in files.iter().enumerate() {
            let p = dir.join(f);
            std::fs::create_dir_all(p.parent().unwrap()).unwrap();
            RgbImage::from_pixel(4, 4, Rgb([i as u8 * 7, 3, 9])).save(p).unwrap();
        }
        ingest_catalog(dir, "ikea", &CategoryMap::new()).unwrap().0
    }

    #[test]
    fn excluded_assets_are_not_embedded() {
        let dir = tempfile::tempdir().unwrap();
        let mut idx = fixture(dir.path(), &["bed/a.png", "bed/b.png", "bed/c.png", "bed/d.png"]);
        idx.assets[3].exclude(ExclusionReason::SceneImage);
        let p = StubEmbeddingProvider::default();
        let (embedded, warnings) = index_embeddings(idx.clone(), &p).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(embedded.embeddings.len(), 3);
        assert!(!embedded.embeddings.contains_key("bed_d.png"));
        assert_eq!(embedded.provider_id.as_deref(), Some(p.provider_id()));
        embedded.check_invariants().unwrap();
        let (again, _) = index_embeddings(idx, &p).unwrap();
        assert_eq!(again.embeddings, embedded.embeddings);
        for v in embedded.embeddings.values() {
            assert!((v.norm() - 1.0).abs() < 1e-6);
        }
    }

    struct Flaky {
        inner: StubEmbeddingProvider,
        fail_all: bool,
    }

    impl EmbeddingProvider for Flaky {
        fn provider_id(&self) -> &str {
            self.inner.provider_id()
        }
        fn dimension(&self) -> usize {
            self.inner.dimension()
        }
        fn embed_text(&self, t: &str) -> Result<EmbeddingVector, String> {
            self.inner.embed_text(t)
        }
        fn embed_image(&self, img: &DynamicImage) -> Result<EmbeddingVector, String> {
            if self.fail_all || img.to_rgb8().get_pixel(0, 0).0[0] == 0 {
                Err("encoder crashed".into())
            } else {
                self.inner.embed_image(img)
            }
        }
    }

    #[test]
    fn provider_failures_exclude_then_become_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let idx = fixture(dir.path(), &["bed/a.png", "bed/b.png", "bed/c.png"]);
        let flaky = Flaky { inner: StubEmbeddingProvider::default(), fail_all: false };
        let (out, warnings) = index_embeddings(idx.clone(), &flaky).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(out.asset("bed_a.png").unwrap().exclusion_reason, ExclusionReason::LowQuality);
        let broken = Flaky { inner: StubEmbeddingProvider::default(), fail_all: true };
        assert!(matches!(
            index_embeddings(idx, &broken),
            Err(RetrievalError::ProviderFailureRate { failed: 3, attempted: 3 })
        ));
    }

    #[test]
    fn ranking_rules() {
        let dir = tempfile::tempdir().unwrap();
        let idx = fixture(dir.path(), &["bed/a.png", "bed/b.png", "bed/c.png", "desk/d.png"]);
        let p = StubEmbeddingProvider::default();
        let (idx, _) = index_embeddings(idx, &p).unwrap();
        let target = idx.embeddings["bed_b.png"].clone();
        let ranked = rank_assets(&target, &idx, "bed", 2).unwrap();
        assert_eq!(ranked[0].asset_id, "bed_b.png");
        assert!((ranked[0].similarity_score - 1.0).abs() < 1e-6);
        assert_eq!(ranked.len(), 2);
        let all = rank_assets(&target, &idx, "bed", 10).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.windows(2).all(|w| w[0].similarity_score >= w[1].similarity_score));
        assert!(rank_assets(&target, &idx, "sofa", 3).unwrap().is_empty());
        assert!(matches!(rank_assets(&target, &idx, "bed", 0), Err(RetrievalError::ZeroK)));
        let other = StubEmbeddingProvider::new(8).embed_text("x").unwrap();
        assert!(matches!(rank_assets(&other, &idx, "bed", 1), Err(RetrievalError::ProviderMismatch { .. })));
    }

    #[test]
    fn selection_keys_and_manual_composition() {
        let dir = tempfile::tempdir().unwrap();
        let files: Vec<String> =
            (0..10).map(|i| format!("{}/item{i}.png", if i < 6 { "bed" } else { "desk" })).collect();
        let refs: Vec<&str> = files.iter().map(String::as_str).collect();
        let p = StubEmbeddingProvider::default();
        let (idx, _) = index_embeddings(fixture(dir.path(), &refs), &p).unwrap();
        let mut req = DesignRequest::new("bedroom", "modern", 4.0, 3.0, &["bed", "wardrobe"]);
        req.items_per_category = 2;
        let sel = select_furniture(&req, &idx, &p).unwrap();
        assert_eq!(sel.picks.keys().collect::<Vec<_>>(), ["bed", "wardrobe"]);
        assert!(sel.picks["wardrobe"].is_empty());
        let manual = rank_assets(&p.embed_text(&build_query(&req, "bed").unwrap()).unwrap(), &idx, "bed", 2).unwrap();
        assert_eq!(sel.picks["bed"], manual);
        assert_eq!(select_furniture(&req, &idx, &p).unwrap(), sel);
    }
}
