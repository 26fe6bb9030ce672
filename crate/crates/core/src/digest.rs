//! SHA-256 helpers shared by prompt metadata, layout hashes and the artifact store.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(sha256(bytes))
}

/// Hash of a value's JSON encoding. Struct fields serialize in declaration
/// order and maps used in hashed values are ordered, so the encoding is stable.
pub fn json_sha256<T: Serialize>(value: &T) -> [u8; 32] {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    sha256(&bytes)
}

pub fn json_sha256_hex<T: Serialize>(value: &T) -> String {
    hex::encode(json_sha256(value))
}
