//! Incremental task-ID classifier over stored nearest-centroid exemplars.
//!
//! Every trained signature contributes its pooled neighbors as exemplars
//! labeled with the signature's task id. A sample is assigned the task of
//! its nearest exemplar under L1; a batch is assigned the most frequent
//! per-sample prediction. Nothing is ever removed or retrained.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{mode_lowest, EmbeddingBatch, TaskId, TaskSignature};
use crate::error::{Error, Result};
use crate::metric;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskClassifier {
    dim: Option<usize>,
    /// Row-major exemplar vectors.
    exemplars: Vec<f64>,
    exemplar_tasks: Vec<TaskId>,
    centroids_by_task: BTreeMap<TaskId, Vec<Vec<f64>>>,
    trained_tasks: BTreeSet<TaskId>,
}

impl TaskClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trained_tasks(&self) -> &BTreeSet<TaskId> {
        &self.trained_tasks
    }

    pub fn num_tasks(&self) -> usize {
        self.trained_tasks.len()
    }

    pub fn exemplar_count(&self) -> usize {
        self.exemplar_tasks.len()
    }

    pub fn exemplar(&self, i: usize) -> (&[f64], TaskId) {
        let dim = self.dim.unwrap_or(0);
        (&self.exemplars[i * dim..(i + 1) * dim], self.exemplar_tasks[i])
    }

    pub fn centroids(&self, task: TaskId) -> Option<&[Vec<f64>]> {
        self.centroids_by_task.get(&task).map(Vec::as_slice)
    }

    pub fn fit_increment(&mut self, sig: &TaskSignature) -> Result<()> {
        if self.trained_tasks.contains(&sig.task_id) {
            return Err(Error::DuplicateTask(sig.task_id));
        }
        if let Some(dim) = self.dim {
            if dim != sig.dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: sig.dim,
                });
            }
        }
        self.dim = Some(sig.dim);
        for v in sig.pooled_neighbors() {
            self.exemplars.extend_from_slice(v);
            self.exemplar_tasks.push(sig.task_id);
        }
        self.centroids_by_task.insert(sig.task_id, sig.centroids.clone());
        self.trained_tasks.insert(sig.task_id);
        Ok(())
    }

    fn check_ready(&self, dim: usize) -> Result<usize> {
        let own = match self.dim {
            Some(d) if !self.trained_tasks.is_empty() => d,
            _ => return Err(Error::EmptyClassifier),
        };
        if own != dim {
            return Err(Error::DimensionMismatch {
                expected: own,
                actual: dim,
            });
        }
        Ok(own)
    }

    fn nearest(&self, x: &[f64], dim: usize) -> TaskId {
        let mut best: Option<(f64, TaskId, usize)> = None;
        for (i, (v, &task)) in self.exemplars.chunks_exact(dim).zip(&self.exemplar_tasks).enumerate() {
            let d = metric::manhattan(x, v);
            let better = match best {
                None => true,
                Some((bd, bt, bi)) => d.total_cmp(&bd).then(task.cmp(&bt)).then(i.cmp(&bi)) == Ordering::Less,
            };
            if better {
                best = Some((d, task, i));
            }
        }
        best.map(|(_, t, _)| t).expect("classifier has exemplars")
    }

    pub fn predict_sample(&self, x: &[f64]) -> Result<TaskId> {
        let dim = self.check_ready(x.len())?;
        Ok(self.nearest(x, dim))
    }

    /// Per-row predictions, in row order.
    pub fn predict_rows(&self, batch: &EmbeddingBatch) -> Result<Vec<TaskId>> {
        let dim = self.check_ready(batch.dim())?;
        Ok(batch
            .as_slice()
            .par_chunks_exact(dim)
            .map(|row| self.nearest(row, dim))
            .collect())
    }

    /// Majority vote over the batch; ties go to the lowest task id.
    pub fn predict_batch(&self, batch: &EmbeddingBatch) -> Result<TaskId> {
        let rows = self.predict_rows(batch)?;
        mode_lowest(rows).ok_or(Error::EmptyBatch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(task_id: TaskId, points: &[[f64; 2]]) -> TaskSignature {
        TaskSignature {
            task_id,
            dim: 2,
            k: points.len(),
            created_at: 0,
            centroids: vec![points[0].to_vec()],
            neighbor_sets: vec![points.iter().map(|p| p.to_vec()).collect()],
            neighbor_rows: vec![(0..points.len()).collect()],
        }
    }

    #[test]
    fn first_fit_and_additivity() {
        let mut clf = TaskClassifier::new();
        clf.fit_increment(&sig(0, &[[1.0, 0.0], [0.9, 0.1]])).unwrap();
        assert_eq!(clf.trained_tasks().iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(clf.exemplar_count(), 2);
        clf.fit_increment(&sig(1, &[[0.0, 1.0]])).unwrap();
        assert_eq!(clf.exemplar_count(), 3);
        assert!(matches!(
            clf.fit_increment(&sig(0, &[[1.0, 0.0]])),
            Err(Error::DuplicateTask(0))
        ));
        assert_eq!(clf.exemplar_count(), 3);
    }

    #[test]
    fn exact_exemplar_and_single_task() {
        let mut clf = TaskClassifier::new();
        clf.fit_increment(&sig(0, &[[1.0, 0.0]])).unwrap();
        assert_eq!(clf.predict_sample(&[-1.0, 0.0]).unwrap(), 0);
        clf.fit_increment(&sig(1, &[[0.0, 1.0]])).unwrap();
        clf.fit_increment(&sig(2, &[[0.0, -1.0]])).unwrap();
        clf.fit_increment(&sig(3, &[[0.6, 0.8]])).unwrap();
        assert_eq!(clf.predict_sample(&[0.6, 0.8]).unwrap(), 3);
    }

    #[test]
    fn ties_go_to_lower_task() {
        let mut clf = TaskClassifier::new();
        clf.fit_increment(&sig(0, &[[1.0, 0.0]])).unwrap();
        clf.fit_increment(&sig(1, &[[0.0, 1.0]])).unwrap();
        assert_eq!(clf.predict_sample(&[0.5, 0.5]).unwrap(), 0);
    }

    #[test]
    fn empty_classifier_errors() {
        let clf = TaskClassifier::new();
        assert!(matches!(clf.predict_sample(&[1.0, 0.0]), Err(Error::EmptyClassifier)));
        let b = EmbeddingBatch::from_rows(0, &[vec![1.0, 0.0]], None).unwrap();
        assert!(matches!(clf.predict_batch(&b), Err(Error::EmptyClassifier)));
    }

    #[test]
    fn dimension_checked() {
        let mut clf = TaskClassifier::new();
        clf.fit_increment(&sig(0, &[[1.0, 0.0]])).unwrap();
        assert!(matches!(
            clf.predict_sample(&[1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn batch_majority() {
        let mut clf = TaskClassifier::new();
        clf.fit_increment(&sig(0, &[[1.0, 0.0]])).unwrap();
        clf.fit_increment(&sig(1, &[[0.0, 1.0]])).unwrap();
        let rows = vec![vec![0.1, 1.0], vec![0.2, 1.0], vec![1.0, 0.1]];
        let b = EmbeddingBatch::from_rows(0, &rows, None).unwrap();
        assert_eq!(clf.predict_batch(&b).unwrap(), 1);
    }
}
