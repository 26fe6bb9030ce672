//! Catalog archive file.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes   "DCMCATLG"
//! format_version   u32
//! manifest_len     u64
//! manifest         JSON      store, root_path, created_at, provider_id,
//!                            assets, dimension, embedding_order
//! embedding_count  u64
//! dimension        u32
//! embeddings       f32 x count x dimension, rows in embedding_order
//! checksum         32 bytes  SHA-256 of every preceding byte
//! ```

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CatalogError, CatalogIndex};
use crate::digest::sha256;
use crate::model::{EmbeddingVector, FurnitureAsset};

const MAGIC: &[u8; 8] = b"DCMCATLG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("file is {0} bytes, too short to carry a format version (expected format version {FORMAT_VERSION})")]
    TooShort(usize),
    #[error("not a catalog archive (bad magic); expected format version {FORMAT_VERSION}")]
    BadMagic,
    #[error("format version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("truncated format version {version} archive: {0}", version = FORMAT_VERSION)]
    Truncated(String),
    #[error("checksum mismatch in format version {FORMAT_VERSION} archive")]
    Checksum,
    #[error("manifest: {0}")]
    Manifest(String),
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    store: String,
    root_path: PathBuf,
    created_at: DateTime<Utc>,
    provider_id: Option<String>,
    assets: Vec<FurnitureAsset>,
    dimension: usize,
    embedding_order: Vec<String>,
}

/// Serialize an index into archive bytes.
pub fn write_index(index: &CatalogIndex) -> Result<Vec<u8>, CatalogError> {
    index.check_invariants()?;
    let dimension = index.dimension().unwrap_or(0);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        store: index.store.clone(),
        root_path: index.root_path.clone(),
        created_at: index.created_at,
        provider_id: index.provider_id.clone(),
        assets: index.assets.clone(),
        dimension,
        embedding_order: index.embeddings.keys().cloned().collect(),
    };
    let manifest_bytes = serde_json::to_vec(&manifest).map_err(|e| FormatError::Manifest(e.to_string()))?;

    let mut buf = Vec::with_capacity(64 + manifest_bytes.len() + index.embeddings.len() * dimension * 4);
    buf.write_all(MAGIC)?;
    buf.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    buf.write_u64::<LittleEndian>(manifest_bytes.len() as u64)?;
    buf.write_all(&manifest_bytes)?;
    buf.write_u64::<LittleEndian>(index.embeddings.len() as u64)?;
    buf.write_u32::<LittleEndian>(dimension as u32)?;
    for v in index.embeddings.values() {
        for x in &v.values {
            buf.write_f32::<LittleEndian>(*x)?;
        }
    }
    let checksum = sha256(&buf);
    buf.write_all(&checksum)?;
    Ok(buf)
}

fn truncated(what: &str) -> impl Fn(std::io::Error) -> FormatError + '_ {
    move |_| FormatError::Truncated(format!("ended inside {what}"))
}

/// Parse archive bytes back into an index.
pub fn read_index(bytes: &[u8]) -> Result<CatalogIndex, CatalogError> {
    if bytes.len() < MAGIC.len() + 4 {
        return Err(FormatError::TooShort(bytes.len()).into());
    }
    if &bytes[..8] != MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    let mut cur = Cursor::new(&bytes[8..]);
    let version = cur.read_u32::<LittleEndian>().map_err(truncated("header"))?;
    if version != FORMAT_VERSION {
        return Err(FormatError::VersionMismatch { found: version }.into());
    }
    if bytes.len() < 32 {
        return Err(FormatError::Truncated("missing checksum".into()).into());
    }
    let manifest_len = cur.read_u64::<LittleEndian>().map_err(truncated("header"))? as usize;
    let remaining = bytes.len().saturating_sub(8 + cur.position() as usize);
    if manifest_len > remaining {
        return Err(FormatError::Truncated(format!("manifest needs {manifest_len} bytes, {remaining} left")).into());
    }
    let mut manifest_bytes = vec![0u8; manifest_len];
    cur.read_exact(&mut manifest_bytes).map_err(truncated("manifest"))?;
    let count = cur.read_u64::<LittleEndian>().map_err(truncated("embedding header"))? as usize;
    let dimension = cur.read_u32::<LittleEndian>().map_err(truncated("embedding header"))? as usize;
    let body_end = 8 + cur.position() as usize;
    let block_len = count
        .checked_mul(dimension)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FormatError::Truncated("embedding block size overflows".into()))?;
    let expected_len = body_end + block_len + 32;
    if bytes.len() != expected_len {
        return Err(FormatError::Truncated(format!("expected {expected_len} bytes, found {}", bytes.len())).into());
    }
    let (payload, checksum) = bytes.split_at(bytes.len() - 32);
    if sha256(payload) != checksum {
        return Err(FormatError::Checksum.into());
    }

    let manifest: Manifest =
        serde_json::from_slice(&manifest_bytes).map_err(|e| FormatError::Manifest(e.to_string()))?;
    if manifest.format_version != version {
        return Err(FormatError::Manifest(format!(
            "manifest says version {} but header says {version}",
            manifest.format_version
        ))
        .into());
    }
    if manifest.embedding_order.len() != count || manifest.dimension != dimension {
        return Err(FormatError::Manifest("embedding header disagrees with manifest".into()).into());
    }

    let provider = manifest.provider_id.clone().unwrap_or_default();
    let mut block = Cursor::new(&bytes[body_end..body_end + block_len]);
    let mut embeddings = BTreeMap::new();
    for id in manifest.embedding_order {
        let mut values = vec![0f32; dimension];
        block.read_f32_into::<LittleEndian>(&mut values).map_err(truncated("embedding block"))?;
        let v = EmbeddingVector::new(values, provider.clone())
            .map_err(|e| FormatError::Manifest(format!("embedding for {id}: {e}")))?;
        embeddings.insert(id, v);
    }

    let index = CatalogIndex {
        store: manifest.store,
        root_path: manifest.root_path,
        assets: manifest.assets,
        embeddings,
        created_at: manifest.created_at,
        provider_id: manifest.provider_id,
    };
    index.check_invariants()?;
    Ok(index)
}

/// Write the archive atomically (temp file, then rename).
pub fn persist_index(index: &CatalogIndex, path: &Path) -> Result<(), CatalogError> {
    let bytes = write_index(index)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<CatalogIndex, CatalogError> {
    read_index(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExclusionReason, SourceSplit};

    fn asset(id: &str, excluded: bool) -> FurnitureAsset {
        FurnitureAsset {
            asset_id: id.into(),
            category: "bed".into(),
            image_path: format!("bed/{id}"),
            has_alpha: true,
            source_split: Some(SourceSplit::Validation),
            excluded,
            exclusion_reason: if excluded { ExclusionReason::SceneImage } else { ExclusionReason::None },
        }
    }

    fn two_asset_index() -> CatalogIndex {
        let mut embeddings = BTreeMap::new();
        embeddings.insert("a".into(), EmbeddingVector::normalized(&[0.1, 0.7, -0.3], "stub").unwrap());
        embeddings.insert("b".into(), EmbeddingVector::normalized(&[1e-7, 3.0, 2.0], "stub").unwrap());
        CatalogIndex {
            store: "ikea".into(),
            root_path: "/data/ikea".into(),
            assets: vec![asset("a", false), asset("b", false), asset("c", true)],
            embeddings,
            created_at: "2025-03-01T12:34:56.123456789Z".parse().unwrap(),
            provider_id: Some("stub".into()),
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let idx = two_asset_index();
        let back = read_index(&write_index(&idx).unwrap()).unwrap();
        assert_eq!(back, idx);
        for (id, v) in &idx.embeddings {
            let bits: Vec<u32> = v.values.iter().map(|x| x.to_bits()).collect();
            let back_bits: Vec<u32> = back.embeddings[id].values.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits, back_bits);
        }
    }

    #[test]
    fn empty_file_is_version_error() {
        let err = read_index(&[]).unwrap_err();
        assert!(matches!(err, CatalogError::Format(FormatError::TooShort(0))));
        assert!(err.to_string().contains("format version 1"));
    }

    #[test]
    fn wrong_version_reported() {
        let mut bytes = write_index(&two_asset_index()).unwrap();
        bytes[8] = 7;
        assert!(matches!(read_index(&bytes), Err(CatalogError::Format(FormatError::VersionMismatch { found: 7 }))));
    }

    #[test]
    fn truncation_and_corruption_detected() {
        let bytes = write_index(&two_asset_index()).unwrap();
        for cut in [13, 40, bytes.len() - 40, bytes.len() - 1] {
            assert!(matches!(read_index(&bytes[..cut]), Err(CatalogError::Format(_))), "cut at {cut}");
        }
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 40] ^= 0x01;
        assert!(matches!(read_index(&flipped), Err(CatalogError::Format(FormatError::Checksum))));
    }

    #[test]
    fn unembedded_index_round_trips() {
        let mut idx = two_asset_index();
        idx.embeddings.clear();
        idx.provider_id = None;
        assert_eq!(read_index(&write_index(&idx).unwrap()).unwrap(), idx);
    }

    #[test]
    fn invalid_index_is_refused() {
        let mut idx = two_asset_index();
        idx.embeddings.remove("b");
        assert!(matches!(write_index(&idx), Err(CatalogError::Invariant(_))));
    }

    #[test]
    fn persist_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/catalog.dcat");
        let idx = two_asset_index();
        persist_index(&idx, &path).unwrap();
        assert_eq!(load_index(&path).unwrap(), idx);
    }
}
