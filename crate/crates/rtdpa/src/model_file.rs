//! Single-file model container.
//!
//! Layout: `RTDPA` magic, little-endian `u32` schema version, little-endian
//! `u64` payload length, SHA-256 of the payload, then the JSON payload.

use std::collections::BTreeMap;
use std::path::Path;

use rtdpa_core::dataset::RowType;
use rtdpa_core::framework::RtdpaModel;
use rtdpa_core::metrics::MetricsReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

pub const MAGIC: &[u8; 5] = b"RTDPA";
pub const SCHEMA_VERSION: u32 = 1;
const HEADER_LEN: usize = 5 + 4 + 8 + 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checksum mismatch; the file is corrupted")]
    Checksum,
    #[error("payload: {0}")]
    Payload(String),
}

/// A trained registry with the reports produced while training it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: RtdpaModel,
    pub reports: BTreeMap<RowType, MetricsReport>,
}

pub fn encode(m: &ModelFile) -> Vec<u8> {
    encode_versioned(m, SCHEMA_VERSION)
}

fn encode_versioned(m: &ModelFile, version: u32) -> Vec<u8> {
    let payload = serde_json::to_vec(m).expect("model serializes");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelFile, ModelFileError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ModelFileError::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    let version = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    if version != SCHEMA_VERSION {
        return Err(ModelFileError::VersionMismatch { found: version, expected: SCHEMA_VERSION });
    }
    let len = u64::from_le_bytes(bytes[9..17].try_into().unwrap()) as usize;
    let expected = HEADER_LEN.saturating_add(len);
    if bytes.len() != expected {
        return Err(ModelFileError::Truncated { expected, found: bytes.len() });
    }
    let payload = &bytes[HEADER_LEN..];
    if Sha256::digest(payload).as_slice() != &bytes[17..HEADER_LEN] {
        return Err(ModelFileError::Checksum);
    }
    serde_json::from_slice(payload).map_err(|e| ModelFileError::Payload(e.to_string()))
}

pub fn save(m: &ModelFile, path: &Path) -> AppResult<()> {
    std::fs::write(path, encode(m)).map_err(|e| AppError::write(path, e))
}

pub fn load(path: &Path) -> AppResult<ModelFile> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&bytes).map_err(|e| AppError::parse(path, e))
}
