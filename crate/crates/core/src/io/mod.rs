//! On-disk formats: EMB1 embedding files, their line-delimited text
//! alternative, and orchestrator snapshots. Every write goes through a
//! temporary file in the target directory followed by a rename.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::domain::EmbeddingBatch;
use crate::error::{Error, Result};

pub mod emb1;
pub mod snapshot;
pub mod text;

pub use emb1::{decode_emb1, encode_emb1, EMB1_MAGIC, EMB1_VERSION};
pub use snapshot::{restore_state, snapshot_state, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Re-split all rows into batches of this size.
    pub batch_size: Option<usize>,
    /// Reject files whose dimensionality differs.
    pub expected_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Emb1,
    Text,
}

impl Format {
    pub fn sniff(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(EMB1_MAGIC) {
            return Ok(Format::Emb1);
        }
        match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'{') => Ok(Format::Text),
            None if !bytes.is_empty() => Ok(Format::Text),
            _ => Err(Error::BadMagic),
        }
    }

    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("txt") => Format::Text,
            _ => Format::Emb1,
        }
    }
}

pub fn read_embedding_file(path: &Path, opts: ReadOptions) -> Result<Vec<EmbeddingBatch>> {
    let bytes = fs::read(path)?;
    read_embedding_bytes(&bytes, opts)
}

pub fn read_embedding_bytes(bytes: &[u8], opts: ReadOptions) -> Result<Vec<EmbeddingBatch>> {
    if opts.batch_size == Some(0) {
        return Err(Error::InvalidParameter("batch size must be positive".into()));
    }
    let batches = match Format::sniff(bytes)? {
        Format::Emb1 => emb1::decode_emb1(bytes, opts)?,
        Format::Text => text::decode_text(bytes, opts)?,
    };
    if let (Some(expected), Some(first)) = (opts.expected_dim, batches.first()) {
        if first.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: first.dim(),
            });
        }
    }
    Ok(batches)
}

/// Writes EMB1 unless the extension names the text format.
pub fn write_embedding_file(path: &Path, batches: &[EmbeddingBatch]) -> Result<()> {
    let bytes = match Format::from_path(path) {
        Format::Emb1 => emb1::encode_emb1(batches)?,
        Format::Text => text::encode_text(batches).into_bytes(),
    };
    write_atomic(path, &bytes)
}

/// Concatenates rows (and labels, when every batch has them) and re-chunks.
pub(crate) fn rechunk(
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<u32>>,
    size: usize,
) -> Result<Vec<EmbeddingBatch>> {
    let rows = data.len() / dim;
    let mut out = Vec::with_capacity(rows.div_ceil(size));
    for (i, start) in (0..rows).step_by(size).enumerate() {
        let end = (start + size).min(rows);
        let chunk = data[start * dim..end * dim].to_vec();
        let chunk_labels = labels.as_ref().map(|l| l[start..end].to_vec());
        out.push(EmbeddingBatch::from_raw(i as u64, dim, chunk, chunk_labels)?);
    }
    Ok(out)
}
