//! EMB1: little-endian header (`EMB1`, version, dim, count, has_labels)
//! followed by `count * dim` f32 values row-major and, optionally, `count`
//! u32 task labels. A file may hold several records back to back; each
//! record is one batch.

use crate::domain::EmbeddingBatch;
use crate::error::{Error, Result};
use crate::io::{rechunk, ReadOptions};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, element_start: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::TruncatedFile {
                offset: element_start as u64,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, start: usize) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, start)?.try_into().expect("4 bytes")))
    }
}

struct Record {
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<u32>>,
}

fn decode_records(bytes: &[u8]) -> Result<Vec<Record>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let mut records = Vec::new();
    let mut global_row = 0usize;
    while cur.pos < bytes.len() {
        let start = cur.pos;
        if cur.take(4, start)? != EMB1_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = cur.u32(start)?;
        if version != EMB1_VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let dim = cur.u32(start)? as usize;
        let count = cur.u32(start)? as usize;
        let has_labels = match cur.take(1, start)?[0] {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Corrupt(format!(
                    "has_labels flag {other} at offset {}",
                    cur.pos - 1
                )))
            }
        };
        if dim == 0 {
            return Err(Error::Corrupt(format!("zero dimension in record at offset {start}")));
        }
        if let Some(first) = records.first().map(|r: &Record| r.dim) {
            if first != dim {
                return Err(Error::DimensionMismatch {
                    expected: first,
                    actual: dim,
                });
            }
        }
        let mut data = Vec::with_capacity(count.saturating_mul(dim).min(bytes.len() / 4));
        for row in 0..count {
            let row_start = cur.pos;
            let raw = cur.take(4 * dim, row_start)?;
            for (col, chunk) in raw.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: global_row + row,
                        col,
                    });
                }
                data.push(v as f64);
            }
        }
        let labels = if has_labels {
            let labels_start = cur.pos;
            let raw = cur.take(4 * count, labels_start)?;
            Some(
                raw.chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            )
        } else {
            None
        };
        global_row += count;
        if count > 0 {
            records.push(Record { dim, data, labels });
        }
    }
    Ok(records)
}

pub fn decode_emb1(bytes: &[u8], opts: ReadOptions) -> Result<Vec<EmbeddingBatch>> {
    let records = decode_records(bytes)?;
    match opts.batch_size {
        None => records
            .into_iter()
            .enumerate()
            .map(|(i, r)| EmbeddingBatch::from_raw(i as u64, r.dim, r.data, r.labels))
            .collect(),
        Some(size) => {
            let Some(dim) = records.first().map(|r| r.dim) else {
                return Ok(Vec::new());
            };
            let all_labeled = records.iter().all(|r| r.labels.is_some());
            let mut data = Vec::new();
            let mut labels = all_labeled.then(Vec::new);
            for r in records {
                data.extend(r.data);
                if let (Some(acc), Some(l)) = (labels.as_mut(), r.labels) {
                    acc.extend(l);
                }
            }
            rechunk(dim, data, labels, size)
        }
    }
}

pub fn encode_emb1(batches: &[EmbeddingBatch]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let dim = batches.first().map(EmbeddingBatch::dim);
    for b in batches {
        if Some(b.dim()) != dim {
            return Err(Error::DimensionMismatch {
                expected: dim.unwrap_or(0),
                actual: b.dim(),
            });
        }
        let dim32 = u32::try_from(b.dim()).map_err(|_| Error::InvalidParameter("dim exceeds u32".into()))?;
        let count = u32::try_from(b.len()).map_err(|_| Error::InvalidParameter("row count exceeds u32".into()))?;
        out.reserve(HEADER_LEN + b.as_slice().len() * 4 + b.len() * 4);
        out.extend_from_slice(EMB1_MAGIC);
        out.extend_from_slice(&EMB1_VERSION.to_le_bytes());
        out.extend_from_slice(&dim32.to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        out.push(b.labels().is_some() as u8);
        for &v in b.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(labels) = b.labels() {
            for &l in labels {
                out.extend_from_slice(&l.to_le_bytes());
            }
        }
    }
    Ok(out)
}
