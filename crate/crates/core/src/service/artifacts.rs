use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::digest::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("artifact {digest} is missing from {dir}")]
    Missing { digest: String, dir: PathBuf },
    #[error("artifact {digest} is corrupt: content hashes to {actual}")]
    Corrupt { digest: String, actual: String },
    #[error("artifact store I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Content-addressed blob directory. Blobs are named by their SHA-256 and
/// written to a temp file, synced, then renamed into place, so a reader never
/// sees a partial blob.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    dir: PathBuf,
}

impl ArtifactStore {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("tmp"))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, digest: &str) -> PathBuf {
        self.dir.join(&digest[..2]).join(digest)
    }

    /// Store `bytes`; returns the hex digest. Storing the same content twice is a no-op.
    pub fn put(&self, bytes: &[u8]) -> Result<String, ArtifactError> {
        let digest = sha256_hex(bytes);
        let path = self.path_of(&digest);
        if path.exists() {
            return Ok(digest);
        }
        fs::create_dir_all(path.parent().expect("blob path has a parent"))?;
        static NEXT_TMP: AtomicU64 = AtomicU64::new(0);
        let n = NEXT_TMP.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join("tmp").join(format!("{digest}.{}.{n}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(digest)
    }

    /// Read a blob and verify it still hashes to its name.
    pub fn get(&self, digest: &str) -> Result<Vec<u8>, ArtifactError> {
        if digest.len() < 2 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(ArtifactError::Missing { digest: digest.to_string(), dir: self.dir.clone() });
        }
        let bytes = match fs::read(self.path_of(digest)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ArtifactError::Missing { digest: digest.to_string(), dir: self.dir.clone() })
            }
            Err(e) => return Err(e.into()),
        };
        let actual = sha256_hex(&bytes);
        if actual != digest {
            return Err(ArtifactError::Corrupt { digest: digest.to_string(), actual });
        }
        Ok(bytes)
    }

    pub fn contains(&self, digest: &str) -> bool {
        digest.len() >= 2 && self.path_of(digest).exists()
    }
}
