//! Task signatures: per-cluster centroids and the members nearest to them.

use std::cmp::Ordering;

use crate::clustering::{cluster_embeddings, ClusterParams};
use crate::domain::{ClusterAssignment, EmbeddingBatch, TaskId, TaskSignature};
use crate::error::{Error, Result};
use crate::metric;

pub const DEFAULT_K: usize = 10;

/// Arithmetic mean of each cluster's members, ordered by cluster label.
pub fn compute_centroids(batch: &EmbeddingBatch, assignment: &ClusterAssignment) -> Result<Vec<Vec<f64>>> {
    if assignment.num_clusters == 0 {
        return Err(Error::NoClusters);
    }
    if assignment.labels.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            expected: batch.len(),
            actual: assignment.labels.len(),
        });
    }
    Ok(assignment.members().iter().map(|rows| mean_of(batch, rows)).collect())
}

fn mean_of(batch: &EmbeddingBatch, rows: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; batch.dim()];
    for &r in rows {
        for (a, v) in acc.iter_mut().zip(batch.row(r)) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Row index as supplied by the caller.
    pub row: usize,
    pub distance: f64,
}

fn by_distance_then_row(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance.total_cmp(&b.distance).then_with(|| a.row.cmp(&b.row))
}

/// The `min(k, members.len())` members closest to `centroid` under L1,
/// ascending by distance with ties broken by row index.
pub fn nearest_neighbors(members: &[(usize, &[f64])], centroid: &[f64], k: usize) -> Vec<Neighbor> {
    let mut scored: Vec<Neighbor> = members
        .iter()
        .map(|&(row, v)| Neighbor {
            row,
            distance: metric::manhattan(v, centroid),
        })
        .collect();
    let take = k.min(scored.len());
    if take == 0 {
        return Vec::new();
    }
    if take < scored.len() {
        scored.select_nth_unstable_by(take - 1, by_distance_then_row);
        scored.truncate(take);
    }
    scored.sort_unstable_by(by_distance_then_row);
    scored
}

/// Clusters the batch and extracts its nearest-centroid representatives.
///
/// When every row is noise the whole batch is treated as a single cluster.
pub fn build_signature(
    batch: &EmbeddingBatch,
    params: &ClusterParams,
    k: usize,
    task_id: TaskId,
) -> Result<TaskSignature> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let assignment = cluster_embeddings(batch, params)?;
    let groups: Vec<Vec<usize>> = if assignment.num_clusters == 0 {
        vec![(0..batch.len()).collect()]
    } else {
        assignment.members()
    };

    let mut centroids = Vec::with_capacity(groups.len());
    let mut neighbor_sets = Vec::with_capacity(groups.len());
    let mut neighbor_rows = Vec::with_capacity(groups.len());
    for rows in &groups {
        let centroid = mean_of(batch, rows);
        let members: Vec<(usize, &[f64])> = rows.iter().map(|&r| (r, batch.row(r))).collect();
        let nearest = nearest_neighbors(&members, &centroid, k);
        neighbor_sets.push(nearest.iter().map(|n| batch.row(n.row).to_vec()).collect());
        neighbor_rows.push(nearest.iter().map(|n| n.row).collect());
        centroids.push(centroid);
    }

    Ok(TaskSignature {
        task_id,
        dim: batch.dim(),
        k,
        created_at: batch.batch_id(),
        centroids,
        neighbor_sets,
        neighbor_rows,
    })
}
