//! Line-delimited text alternative to EMB1: one JSON object per row with a
//! `vector` array, an optional `task` label and an optional `batch` index.
//! Consecutive rows sharing a `batch` value form one batch; without batch
//! indices, rows are chunked by the configured batch size.

use serde::{Deserialize, Serialize};

use crate::domain::EmbeddingBatch;
use crate::error::{Error, Result};
use crate::io::{rechunk, ReadOptions};
use crate::synth::DEFAULT_BATCH_SIZE;

#[derive(Debug, Serialize, Deserialize)]
struct Line {
    vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch: Option<u64>,
}

pub fn decode_text(bytes: &[u8], opts: ReadOptions) -> Result<Vec<EmbeddingBatch>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Corrupt(e.to_string()))?;
    let mut lines = Vec::new();
    let mut dim = None;
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let d = *dim.get_or_insert(line.vector.len());
        if d == 0 || line.vector.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: line.vector.len(),
            });
        }
        lines.push(line);
    }
    let Some(dim) = dim else {
        return Ok(Vec::new());
    };

    let grouped = lines.iter().any(|l| l.batch.is_some());
    if opts.batch_size.is_some() || !grouped {
        let size = opts.batch_size.unwrap_or(DEFAULT_BATCH_SIZE);
        let labels: Option<Vec<u32>> = lines.iter().map(|l| l.task).collect();
        let data = lines.into_iter().flat_map(|l| l.vector).collect();
        return rechunk(dim, data, labels, size);
    }

    let mut out = Vec::new();
    let mut start = 0;
    while start < lines.len() {
        let key = lines[start].batch;
        let end = lines[start..]
            .iter()
            .position(|l| l.batch != key)
            .map_or(lines.len(), |p| start + p);
        let group = &lines[start..end];
        let labels: Option<Vec<u32>> = group.iter().map(|l| l.task).collect();
        let data = group.iter().flat_map(|l| l.vector.iter().copied()).collect();
        out.push(EmbeddingBatch::from_raw(out.len() as u64, dim, data, labels)?);
        start = end;
    }
    Ok(out)
}

pub fn encode_text(batches: &[EmbeddingBatch]) -> String {
    let mut out = String::new();
    for (b, batch) in batches.iter().enumerate() {
        for (i, row) in batch.rows().enumerate() {
            let line = Line {
                vector: row.to_vec(),
                task: batch.labels().map(|l| l[i]),
                batch: Some(b as u64),
            };
            out.push_str(&serde_json::to_string(&line).expect("finite rows serialize"));
            out.push('\n');
        }
    }
    out
}
