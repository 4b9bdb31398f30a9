//! Model persistence: a versioned, checksummed container holding the
//! config, the embedded dataset, the tombstone set and the full node tree
//! with its replay state. One file is one self-contained unlearnable model.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::spn::Spn;

pub const MODEL_FILE_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SPNMODEL";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("model file version {found} is not supported (expected {MODEL_FILE_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
    #[error("encode error: {0}")]
    Encode(String),
}

/// Serializes a model into its container bytes.
pub fn save_bytes(spn: &Spn) -> Result<Vec<u8>, ModelIoError> {
    let payload = bincode::serialize(spn).map_err(|e| ModelIoError::Encode(e.to_string()))?;
    let digest = Sha256::digest(&payload);
    let mut out = Vec::with_capacity(payload.len() + 48);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FILE_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&digest);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Decodes a model from container bytes, checking version and checksum.
pub fn load_bytes(bytes: &[u8]) -> Result<Spn, ModelIoError> {
    let header_len = MAGIC.len() + 4 + 8 + 32;
    if bytes.len() < header_len {
        return Err(ModelIoError::Corrupt("file shorter than header".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_FILE_VERSION {
        return Err(ModelIoError::VersionMismatch { found: version });
    }
    let payload_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let digest_stored = &bytes[20..52];
    let payload = &bytes[52..];
    if payload.len() != payload_len {
        return Err(ModelIoError::Corrupt(format!(
            "payload length {} does not match header {}",
            payload.len(),
            payload_len
        )));
    }
    let digest = Sha256::digest(payload);
    if digest.as_slice() != digest_stored {
        return Err(ModelIoError::Corrupt("checksum mismatch".into()));
    }
    bincode::deserialize(payload).map_err(|e| ModelIoError::Corrupt(e.to_string()))
}

/// Writes the model atomically (write to a temporary file, then rename).
pub fn save(spn: &Spn, path: &Path) -> Result<(), ModelIoError> {
    let bytes = save_bytes(spn)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a model written by [`save`].
pub fn load(path: &Path) -> Result<Spn, ModelIoError> {
    let bytes = std::fs::read(path)?;
    load_bytes(&bytes)
}
