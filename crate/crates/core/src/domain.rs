//! Core data types shared across the engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric;

pub type TaskId = u32;
pub type BatchId = u64;

pub const DEFAULT_DIM: usize = 512;

/// Rows whose norm already lies within this distance of 1 are kept
/// verbatim, which makes normalization idempotent bit-for-bit.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

const ZERO_NORM: f64 = 1e-12;

/// One batch of unit-norm embeddings, stored row-major.
///
/// Row labels are evaluation-only ground truth. Nothing on the online path
/// (clustering, drift, task classification) reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    batch_id: BatchId,
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<TaskId>>,
}

impl EmbeddingBatch {
    /// Validates and unit-normalizes `data` (row-major, `dim` columns).
    pub fn from_raw(batch_id: BatchId, dim: usize, mut data: Vec<f64>, labels: Option<Vec<TaskId>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.len() % dim,
            });
        }
        let rows = data.len() / dim;
        if let Some(labels) = &labels {
            if labels.len() != rows {
                return Err(Error::InvalidParameter(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    rows
                )));
            }
        }
        normalize_rows(dim, &mut data)?;
        Ok(Self {
            batch_id,
            dim,
            data,
            labels,
        })
    }

    pub fn from_rows(batch_id: BatchId, rows: &[Vec<f64>], labels: Option<Vec<TaskId>>) -> Result<Self> {
        let dim = rows.first().ok_or(Error::EmptyBatch)?.len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_raw(batch_id, dim, data, labels)
    }

    pub fn batch_id(&self) -> BatchId {
        self.batch_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[TaskId]> {
        self.labels.as_deref()
    }

    /// The ground-truth task when every row carries the same label.
    pub fn true_task(&self) -> Option<TaskId> {
        let labels = self.labels.as_ref()?;
        let first = *labels.first()?;
        labels.iter().all(|&l| l == first).then_some(first)
    }

    pub fn with_batch_id(mut self, batch_id: BatchId) -> Self {
        self.batch_id = batch_id;
        self
    }
}

/// Scales each row of `data` to unit Euclidean norm in place.
pub fn normalize_rows(dim: usize, data: &mut [f64]) -> Result<()> {
    for (row, chunk) in data.chunks_exact_mut(dim).enumerate() {
        if let Some(col) = chunk.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        let n = metric::norm(chunk);
        if n < ZERO_NORM {
            return Err(Error::ZeroVector { row });
        }
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            chunk.iter_mut().for_each(|v| *v /= n);
        }
    }
    Ok(())
}

/// Assigns sequential batch ids to raw matrices as they are ingested.
#[derive(Debug, Clone)]
pub struct Ingestor {
    dim: usize,
    next_batch_id: BatchId,
}

impl Ingestor {
    pub fn new(dim: usize) -> Self {
        Self { dim, next_batch_id: 0 }
    }

    pub fn starting_at(dim: usize, next_batch_id: BatchId) -> Self {
        Self { dim, next_batch_id }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalize_batch(&mut self, raw: Vec<f64>, labels: Option<Vec<TaskId>>) -> Result<EmbeddingBatch> {
        let batch = EmbeddingBatch::from_raw(self.next_batch_id, self.dim, raw, labels)?;
        self.next_batch_id += 1;
        Ok(batch)
    }
}

/// DBSCAN output for one batch. `-1` marks noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<i32>,
    pub core: Vec<bool>,
    pub num_clusters: usize,
}

impl ClusterAssignment {
    pub const NOISE: i32 = -1;

    /// Row indices per cluster label, in ascending row order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (row, &label) in self.labels.iter().enumerate() {
            if label >= 0 {
                out[label as usize].push(row);
            }
        }
        out
    }

    pub fn noise_rows(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == Self::NOISE)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The representative set for one task: centroids and the nearest member
/// embeddings of each centroid, copied out of the originating batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSignature {
    pub task_id: TaskId,
    pub dim: usize,
    pub k: usize,
    pub created_at: BatchId,
    pub centroids: Vec<Vec<f64>>,
    pub neighbor_sets: Vec<Vec<Vec<f64>>>,
    /// Source row of every stored neighbor, parallel to `neighbor_sets`.
    pub neighbor_rows: Vec<Vec<usize>>,
}

impl TaskSignature {
    pub fn num_centroids(&self) -> usize {
        self.centroids.len()
    }

    /// All neighbor sets concatenated in centroid order.
    pub fn pooled_neighbors(&self) -> Vec<&[f64]> {
        self.neighbor_sets.iter().flatten().map(Vec::as_slice).collect()
    }

    pub fn pooled_len(&self) -> usize {
        self.neighbor_sets.iter().map(Vec::len).sum()
    }
}

/// Append-only store of task signatures. Task ids equal insertion indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskMemory {
    signatures: Vec<TaskSignature>,
}

impl TaskMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn next_task_id(&self) -> TaskId {
        self.signatures.len() as TaskId
    }

    /// Stores `sig` under the next task id and returns that id.
    pub fn push(&mut self, mut sig: TaskSignature) -> TaskId {
        let id = self.next_task_id();
        sig.task_id = id;
        self.signatures.push(sig);
        id
    }

    pub fn get(&self, task_id: TaskId) -> Option<&TaskSignature> {
        self.signatures.get(task_id as usize)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TaskSignature> {
        self.signatures.iter()
    }

    pub fn iter_recent_first(&self) -> std::iter::Rev<std::slice::Iter<'_, TaskSignature>> {
        self.signatures.iter().rev()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftVerdict {
    pub statistic: f64,
    pub threshold: f64,
    pub score: f64,
    pub drifted: bool,
}

impl DriftVerdict {
    pub fn new(statistic: f64, threshold: f64) -> Self {
        let score = statistic - threshold;
        Self {
            statistic,
            threshold,
            score,
            drifted: score > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionKind {
    KnownTask,
    NewTask,
}

/// The classifier disagreed with the memory entry that matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub classifier_predicted: TaskId,
    pub memory_matched: TaskId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnlineDecision {
    pub kind: DecisionKind,
    pub task_id: TaskId,
    pub warning: Option<Mismatch>,
}

/// Most frequent id; ties go to the lowest id.
pub fn mode_lowest<I: IntoIterator<Item = TaskId>>(items: I) -> Option<TaskId> {
    let mut counts: BTreeMap<TaskId, usize> = BTreeMap::new();
    for t in items {
        *counts.entry(t).or_default() += 1;
    }
    // BTreeMap iterates ascending, and max_by_key keeps the last maximum,
    // so walk in reverse to keep the lowest id on ties.
    counts.into_iter().rev().max_by_key(|&(_, c)| c).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn padded(head: &[f64], dim: usize) -> Vec<f64> {
        let mut v = head.to_vec();
        v.resize(dim, 0.0);
        v
    }

    #[test]
    fn three_four_row_becomes_unit() {
        let batch = EmbeddingBatch::from_raw(0, 8, padded(&[3.0, 4.0], 8), None).unwrap();
        let row = batch.row(0);
        assert!((row[0] - 0.6).abs() < 1e-15);
        assert!((row[1] - 0.8).abs() < 1e-15);
        assert!(row[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_row_is_unchanged() {
        let raw = padded(&[0.6, 0.8], 4);
        let batch = EmbeddingBatch::from_raw(0, 4, raw.clone(), None).unwrap();
        for (a, b) in batch.row(0).iter().zip(&raw) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_row_is_rejected() {
        let mut raw = padded(&[1.0], 3);
        raw.extend([0.0; 3]);
        match EmbeddingBatch::from_raw(0, 3, raw, None) {
            Err(Error::ZeroVector { row }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_and_shape_errors() {
        assert!(matches!(
            EmbeddingBatch::from_raw(0, 2, vec![1.0, f64::NAN], None),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            EmbeddingBatch::from_raw(0, 2, vec![1.0, 0.0, 1.0], None),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            EmbeddingBatch::from_raw(0, 2, vec![], None),
            Err(Error::EmptyBatch)
        ));
        assert!(matches!(
            EmbeddingBatch::from_rows(0, &[vec![1.0, 0.0], vec![1.0]], None),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn ingestor_assigns_sequential_ids() {
        let mut ing = Ingestor::new(2);
        let a = ing.normalize_batch(vec![1.0, 1.0], None).unwrap();
        let b = ing.normalize_batch(vec![2.0, 0.0], None).unwrap();
        assert_eq!((a.batch_id(), b.batch_id()), (0, 1));
    }

    #[test]
    fn true_task_requires_uniform_labels() {
        let b = EmbeddingBatch::from_raw(0, 1, vec![1.0, 2.0], Some(vec![3, 3])).unwrap();
        assert_eq!(b.true_task(), Some(3));
        let b = EmbeddingBatch::from_raw(0, 1, vec![1.0, 2.0], Some(vec![3, 4])).unwrap();
        assert_eq!(b.true_task(), None);
    }

    #[test]
    fn verdict_sign_convention() {
        assert!(!DriftVerdict::new(0.1, 0.2).drifted);
        assert!(DriftVerdict::new(0.3, 0.2).drifted);
        assert!(!DriftVerdict::new(0.2, 0.2).drifted);
    }

    #[test]
    fn memory_ids_follow_insertion_order() {
        let sig = TaskSignature {
            task_id: 99,
            dim: 1,
            k: 1,
            created_at: 0,
            centroids: vec![vec![1.0]],
            neighbor_sets: vec![vec![vec![1.0]]],
            neighbor_rows: vec![vec![0]],
        };
        let mut mem = TaskMemory::new();
        assert_eq!(mem.push(sig.clone()), 0);
        assert_eq!(mem.push(sig), 1);
        let ids: Vec<_> = mem.iter_recent_first().map(|s| s.task_id).collect();
        assert_eq!(ids, vec![1, 0]);
    }

    #[test]
    fn mode_prefers_lowest_on_ties() {
        assert_eq!(mode_lowest([2, 1, 2, 1]), Some(1));
        assert_eq!(mode_lowest([4, 4, 1]), Some(4));
        assert_eq!(mode_lowest(std::iter::empty()), None);
    }
}
