//! Density-based clustering of one batch under cosine distance.
//!
//! Plain DBSCAN over the exact pairwise distance matrix. Rows are scanned in
//! ascending order, so a border point reachable from several clusters joins
//! the one whose expansion starts first.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ClusterAssignment, EmbeddingBatch};
use crate::error::{Error, Result};
use crate::metric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Maximum cosine distance between neighbors, in `(0, 2]`.
    pub eps: f64,
    /// Neighborhood size (self included) that makes a point core.
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { eps: 0.3, min_pts: 10 }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 2], got {}",
                self.eps
            )));
        }
        if self.min_pts == 0 {
            return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

const UNCLASSIFIED: i32 = i32::MIN;

/// Rows per parallel work unit when building neighborhoods.
const ROW_BLOCK: usize = 32;

fn neighborhoods(batch: &EmbeddingBatch, eps: f64) -> Vec<Vec<usize>> {
    let m = batch.len();
    let mut out = vec![Vec::new(); m];
    out.par_chunks_mut(ROW_BLOCK).enumerate().for_each(|(block, slots)| {
        for (offset, slot) in slots.iter_mut().enumerate() {
            let i = block * ROW_BLOCK + offset;
            let u = batch.row(i);
            slot.extend((0..m).filter(|&j| metric::cosine_distance(u, batch.row(j)) <= eps));
        }
    });
    out
}

pub fn cluster_embeddings(batch: &EmbeddingBatch, params: &ClusterParams) -> Result<ClusterAssignment> {
    params.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m = batch.len();
    let nbrs = neighborhoods(batch, params.eps);
    let core: Vec<bool> = nbrs.iter().map(|n| n.len() >= params.min_pts).collect();

    let mut labels = vec![UNCLASSIFIED; m];
    let mut next = 0i32;
    let mut queue = VecDeque::new();
    for start in 0..m {
        if labels[start] != UNCLASSIFIED {
            continue;
        }
        if !core[start] {
            labels[start] = ClusterAssignment::NOISE;
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &nbrs[p] {
                match labels[q] {
                    UNCLASSIFIED => {
                        labels[q] = next;
                        if core[q] {
                            queue.push_back(q);
                        }
                    }
                    // provisional noise is necessarily non-core: it becomes a border point
                    ClusterAssignment::NOISE => labels[q] = next,
                    _ => {}
                }
            }
        }
        next += 1;
    }

    // renumber by first appearance in row order
    let mut remap = vec![-1i32; next as usize];
    let mut fresh = 0;
    for label in labels.iter_mut() {
        if *label >= 0 {
            let slot = &mut remap[*label as usize];
            if *slot < 0 {
                *slot = fresh;
                fresh += 1;
            }
            *label = *slot;
        }
    }

    Ok(ClusterAssignment {
        labels,
        core,
        num_clusters: fresh as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: Vec<Vec<f64>>) -> EmbeddingBatch {
        EmbeddingBatch::from_rows(0, &rows, None).unwrap()
    }

    #[test]
    fn identical_vectors_form_one_cluster() {
        let rows = vec![vec![0.0, 1.0, 0.0]; 20];
        let a = cluster_embeddings(&batch(rows), &ClusterParams::default()).unwrap();
        assert_eq!(a.num_clusters, 1);
        assert!(a.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn sparse_points_are_noise() {
        let rows = vec![
            vec![1.0, 0.01 * 1.0],
            vec![1.0, 0.0],
            vec![1.0, 0.02],
            vec![1.0, 0.03],
            vec![1.0, 0.04],
        ];
        let a = cluster_embeddings(&batch(rows), &ClusterParams::default()).unwrap();
        assert_eq!(a.num_clusters, 0);
        assert!(a.labels.iter().all(|&l| l == -1));
    }

    fn on_circle(degrees: &[f64]) -> EmbeddingBatch {
        let rows: Vec<Vec<f64>> = degrees
            .iter()
            .map(|d| vec![d.to_radians().cos(), d.to_radians().sin()])
            .collect();
        batch(rows)
    }

    // eps = 0.03 admits neighbors up to ~14 degrees apart
    const TEN_DEGREE_EPS: f64 = 0.03;

    #[test]
    fn border_point_goes_to_first_expanded_cluster() {
        // row 4 (20 deg) touches a core of each cluster but is not core itself
        let b = on_circle(&[0.0, 0.0, 0.0, 10.0, 20.0, 30.0, 40.0, 40.0, 40.0]);
        let params = ClusterParams {
            eps: TEN_DEGREE_EPS,
            min_pts: 4,
        };
        let a = cluster_embeddings(&b, &params).unwrap();
        assert_eq!(a.num_clusters, 2);
        assert!(!a.core[4]);
        assert!(a.core[3] && a.core[5]);
        assert_eq!(a.labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn labels_renumbered_by_first_appearance() {
        // row 0 is a border point of the cluster whose first core is row 3
        let b = on_circle(&[100.0, 0.0, 0.0, 90.0, 90.0, 0.0, 80.0, 0.0]);
        let params = ClusterParams {
            eps: TEN_DEGREE_EPS,
            min_pts: 4,
        };
        let a = cluster_embeddings(&b, &params).unwrap();
        assert_eq!(a.num_clusters, 2);
        assert!(!a.core[0]);
        assert_eq!(a.labels, vec![0, 1, 1, 0, 0, 1, 0, 1]);
    }

    #[test]
    fn rejects_bad_params() {
        let b = batch(vec![vec![1.0, 0.0]]);
        assert!(cluster_embeddings(&b, &ClusterParams { eps: 0.0, min_pts: 1 }).is_err());
        assert!(cluster_embeddings(&b, &ClusterParams { eps: 2.5, min_pts: 1 }).is_err());
        assert!(cluster_embeddings(&b, &ClusterParams { eps: 0.3, min_pts: 0 }).is_err());
    }

    #[test]
    fn min_pts_one_makes_every_point_core() {
        let b = batch(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let a = cluster_embeddings(&b, &ClusterParams { eps: 0.3, min_pts: 1 }).unwrap();
        assert_eq!(a.labels, vec![0, 1]);
        assert!(a.core.iter().all(|&c| c));
    }
}
