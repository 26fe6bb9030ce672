//! Build a catalog archive from an image tree: ingest, drop scene photos,
//! cut out backgrounds, embed, persist and reload.
//!
//! ```text
//! cargo run --example build_catalog [out_dir]
//! ```

use std::path::PathBuf;

use decomind::catalog::{
    build_catalog, load_index, persist_index, BorderFloodMatting, BorderUniformityDetector, BuildOptions,
};
use decomind::fixtures::write_demo_catalog;
use decomind::model::ExclusionReason;
use decomind::retrieval::StubEmbeddingProvider;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("decomind-build-catalog"));
    let _ = std::fs::remove_dir_all(&out);
    let root = write_demo_catalog(&out.join("images"), 42)?;

    let detector = BorderUniformityDetector::default();
    let matting = BorderFloodMatting::default();
    let options = BuildOptions { scene_detector: Some(&detector), matting: Some(&matting), ..Default::default() };
    let provider = StubEmbeddingProvider::default();
    let (index, warnings) = build_catalog(&root, "ikea", &options, &provider)?;

    println!(
        "{} assets, {} active, provider {}",
        index.assets.len(),
        index.active_assets().count(),
        index.provider_id.as_deref().unwrap_or("-")
    );
    for asset in index.assets.iter().filter(|a| a.exclusion_reason == ExclusionReason::SceneImage) {
        println!("  excluded scene photo: {}", asset.asset_id);
    }
    for w in &warnings {
        println!("  warning [{}] {}: {}", w.code, w.subject, w.message);
    }
    println!("categories: {}", index.categories().join(", "));

    let archive = out.join("catalog.dcm");
    persist_index(&index, &archive)?;
    let reloaded = load_index(&archive)?;
    assert_eq!(reloaded, index);
    println!("wrote {} ({} bytes) and reloaded it unchanged", archive.display(), std::fs::metadata(&archive)?.len());
    Ok(())
}
