use std::collections::{BTreeMap, BTreeSet};
use std::path::{Component, Path};

use chrono::Utc;
use walkdir::WalkDir;

use super::{CatalogError, CatalogIndex};
use crate::model::{normalize_label, ExclusionReason, FurnitureAsset, SourceSplit, Warning};

/// Folder name -> category label. Folders missing from the map use their
/// normalized name as the category.
pub type CategoryMap = BTreeMap<String, String>;

/// Directory under the catalog root that holds background-removed copies.
/// Ingestion skips it, along with any folder starting with `_` or `.`.
pub const TRANSPARENT_DIR: &str = "_transparent";

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn is_skipped_dir(name: &str) -> bool {
    name.starts_with('.') || name.starts_with('_')
}

/// Build an (unembedded) index from a directory tree of furniture images.
///
/// The tree may be `split/category/file`, `category/file`, or any mix. Each
/// readable PNG/JPEG becomes one asset; undecodable files are kept but
/// excluded as low quality.
pub fn ingest_catalog(
    root: &Path,
    store: &str,
    category_map: &CategoryMap,
) -> Result<(CatalogIndex, Vec<Warning>), CatalogError> {
    if !root.is_dir() {
        return Err(CatalogError::MissingRoot(root.to_path_buf()));
    }
    let normalized_map: BTreeMap<String, String> =
        category_map.iter().map(|(k, v)| (normalize_label(k), normalize_label(v))).collect();

    let mut assets = Vec::new();
    let mut warnings = Vec::new();
    let mut ids = BTreeSet::new();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0 || !(e.file_type().is_dir() && is_skipped_dir(&e.file_name().to_string_lossy()))
    });
    for entry in walker {
        let entry = entry.map_err(|e| CatalogError::Io(e.into()))?;
        if !entry.file_type().is_file() || !is_image(entry.path()) {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walk stays under root");
        let folders: Vec<String> = rel
            .parent()
            .map(|p| {
                p.components()
                    .filter_map(|c| match c {
                        Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let source_split = folders.iter().find_map(|f| SourceSplit::from_folder(f));
        let category = folders
            .iter()
            .rev()
            .find(|f| SourceSplit::from_folder(f).is_none())
            .map(|f| {
                let key = normalize_label(f);
                normalized_map.get(&key).cloned().unwrap_or(key)
            })
            .unwrap_or_else(|| "uncategorized".to_string());

        let rel_str =
            rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/");
        let mut asset_id = rel_str.replace('/', "_");
        if !ids.insert(asset_id.clone()) {
            let base = asset_id.clone();
            let mut n = 2;
            while !ids.insert(format!("{base}#{n}")) {
                n += 1;
            }
            asset_id = format!("{base}#{n}");
            warnings.push(Warning::new("asset_id_collision", &asset_id, format!("{rel_str} collides with {base}")));
        }

        let mut asset = FurnitureAsset {
            asset_id,
            category,
            image_path: rel_str,
            has_alpha: false,
            source_split,
            excluded: false,
            exclusion_reason: ExclusionReason::None,
        };
        match image::open(entry.path()) {
            Ok(img) => asset.has_alpha = img.color().has_alpha(),
            Err(e) => {
                warnings.push(Warning::new("unreadable_image", &asset.asset_id, e.to_string()));
                asset.exclude(ExclusionReason::LowQuality);
            }
        }
        assets.push(asset);
    }

    if assets.iter().all(|a| a.excluded) {
        return Err(CatalogError::EmptyCatalog(root.to_path_buf()));
    }
    Ok((
        CatalogIndex {
            store: store.to_string(),
            root_path: root.to_path_buf(),
            assets,
            embeddings: BTreeMap::new(),
            created_at: Utc::now(),
            provider_id: None,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    fn write_png(path: &Path, seed: u8) {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        RgbImage::from_pixel(4, 4, Rgb([seed, 10, 20])).save(path).unwrap();
    }

    #[test]
    fn folder_maps_to_category() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            write_png(&dir.path().join(format!("sofa/s{i}.png")), i);
        }
        let (index, warnings) = ingest_catalog(dir.path(), "ikea", &CategoryMap::new()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(index.assets.len(), 3);
        assert!(index.assets.iter().all(|a| a.category == "sofa" && !a.excluded));
        assert_eq!(index.assets[0].asset_id, "sofa_s0.png");
    }

    #[test]
    fn corrupt_file_is_excluded_low_quality() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..4 {
            write_png(&dir.path().join(format!("chair/c{i}.png")), i);
        }
        std::fs::write(dir.path().join("chair/broken.jpg"), b"not a jpeg").unwrap();
        let (index, warnings) = ingest_catalog(dir.path(), "ikea", &CategoryMap::new()).unwrap();
        assert_eq!(index.assets.len(), 5);
        assert_eq!(index.active_assets().count(), 4);
        let broken = index.asset("chair_broken.jpg").unwrap();
        assert_eq!(broken.exclusion_reason, ExclusionReason::LowQuality);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn splits_and_category_map() {
        let dir = tempfile::tempdir().unwrap();
        write_png(&dir.path().join("Train/Sofas/a.png"), 1);
        write_png(&dir.path().join("Validation/Sofas/b.png"), 2);
        write_png(&dir.path().join("Test/Beds/c.png"), 3);
        write_png(&dir.path().join("_transparent/ignored.png"), 4);
        let map = CategoryMap::from([("sofas".to_string(), "sofa".to_string())]);
        let (index, _) = ingest_catalog(dir.path(), "ikea", &map).unwrap();
        let summary: Vec<_> =
            index.assets.iter().map(|a| (a.asset_id.as_str(), a.category.as_str(), a.source_split)).collect();
        assert_eq!(
            summary,
            vec![
                ("Test_Beds_c.png", "beds", Some(SourceSplit::Test)),
                ("Train_Sofas_a.png", "sofa", Some(SourceSplit::Train)),
                ("Validation_Sofas_b.png", "sofa", Some(SourceSplit::Validation)),
            ]
        );
    }

    #[test]
    fn missing_root_and_empty_catalog() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_catalog(&dir.path().join("nope"), "ikea", &CategoryMap::new()),
            Err(CatalogError::MissingRoot(_))
        ));
        std::fs::create_dir(dir.path().join("bed")).unwrap();
        std::fs::write(dir.path().join("bed/x.png"), b"garbage").unwrap();
        assert!(matches!(ingest_catalog(dir.path(), "ikea", &CategoryMap::new()), Err(CatalogError::EmptyCatalog(_))));
    }

    #[test]
    fn ingestion_is_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        for (i, name) in ["bed/z.png", "bed/a.png", "desk/m.jpg", "desk/sub/q.png"].iter().enumerate() {
            write_png(&dir.path().join(name), i as u8);
        }
        let ids = |idx: &CatalogIndex| idx.assets.iter().map(|a| a.asset_id.clone()).collect::<Vec<_>>();
        let (first, _) = ingest_catalog(dir.path(), "ikea", &CategoryMap::new()).unwrap();
        let (second, _) = ingest_catalog(dir.path(), "ikea", &CategoryMap::new()).unwrap();
        assert_eq!(ids(&first), ids(&second));
        assert_eq!(first.asset("desk_sub_q.png").unwrap().category, "sub");
    }
}
