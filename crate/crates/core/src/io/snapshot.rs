//! Versioned, checksummed snapshots of the full orchestrator state.
//!
//! Layout: `TDSN` magic, u32 version, u64 payload length, SHA-256 of the
//! payload, then the payload itself (JSON). All integers little-endian.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::orchestrator::Orchestrator;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"TDSN";
pub const SNAPSHOT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 4 + 4 + 8 + 32;

pub fn snapshot_state(state: &Orchestrator) -> Vec<u8> {
    let payload = serde_json::to_vec(state).expect("orchestrator state always serializes");
    let digest = Sha256::digest(&payload);
    let mut out = Vec::with_capacity(PREFIX_LEN + payload.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&digest);
    out.extend_from_slice(&payload);
    out
}

pub fn restore_state(bytes: &[u8]) -> Result<Orchestrator> {
    if bytes.len() < PREFIX_LEN {
        return Err(Error::Corrupt(format!("snapshot too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(Error::Corrupt("bad snapshot magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != SNAPSHOT_VERSION {
        return Err(Error::VersionMismatch {
            expected: SNAPSHOT_VERSION,
            found: version,
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let payload = &bytes[PREFIX_LEN..];
    if payload.len() as u64 != len {
        return Err(Error::Corrupt(format!(
            "payload length {} does not match header {}",
            payload.len(),
            len
        )));
    }
    if Sha256::digest(payload).as_slice() != &bytes[16..48] {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    let state: Orchestrator = serde_json::from_slice(payload).map_err(|e| Error::Corrupt(e.to_string()))?;
    state.check_invariants().map_err(Error::Corrupt)?;
    Ok(state)
}

pub fn save_snapshot(path: &Path, state: &Orchestrator) -> Result<()> {
    write_atomic(path, &snapshot_state(state))
}

pub fn load_snapshot(path: &Path) -> Result<Orchestrator> {
    restore_state(&fs::read(path)?)
}
