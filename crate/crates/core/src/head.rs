//! Per-task classification heads.
//!
//! A head is a multinomial logistic-regression probe over standardized
//! embedding features, trained by full-batch gradient descent on
//! cross-entropy.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::TaskId;
use crate::error::{Error, Result};
use crate::metric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub init_seed: u64,
}

impl Default for HeadParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            iterations: 200,
            init_seed: 0,
        }
    }
}

impl HeadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

const INIT_SCALE: f64 = 0.01;
const MIN_FEATURE_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    dim: usize,
    num_classes: usize,
    feature_mean: Vec<f64>,
    feature_scale: Vec<f64>,
    /// `num_classes` rows of `dim` weights.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearHead {
    /// A single-class head that predicts class 0 until trained.
    pub fn untrained(dim: usize) -> Self {
        Self {
            dim,
            num_classes: 1,
            feature_mean: vec![0.0; dim],
            feature_scale: vec![1.0; dim],
            weights: vec![0.0; dim],
            bias: vec![0.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Fits a fresh head on row-major `vectors` with one label per row.
    pub fn fit(dim: usize, vectors: &[f64], labels: &[u32], params: &HeadParams) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        if vectors.is_empty() || labels.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if !vectors.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: vectors.len() % dim,
            });
        }
        let n = vectors.len() / dim;
        if labels.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} rows",
                labels.len(),
                n
            )));
        }
        if let Some((row, col)) = vectors.iter().position(|v| !v.is_finite()).map(|i| (i / dim, i % dim)) {
            return Err(Error::NonFinite { row, col });
        }
        let num_classes = *labels.iter().max().expect("nonempty") as usize + 1;

        let mut feature_mean = vec![0.0; dim];
        for x in vectors.chunks_exact(dim) {
            feature_mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
        }
        feature_mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut feature_scale = vec![0.0; dim];
        for x in vectors.chunks_exact(dim) {
            for ((s, v), m) in feature_scale.iter_mut().zip(x).zip(&feature_mean) {
                *s += (v - m) * (v - m);
            }
        }
        feature_scale
            .iter_mut()
            .for_each(|s| *s = (*s / n as f64).sqrt().max(MIN_FEATURE_SCALE));
        let standardized: Vec<f64> = vectors
            .chunks_exact(dim)
            .flat_map(|x| {
                x.iter()
                    .zip(&feature_mean)
                    .zip(&feature_scale)
                    .map(|((v, m), s)| (v - m) / s)
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(params.init_seed);
        let init = Normal::new(0.0, INIT_SCALE).expect("valid normal");
        let mut head = Self {
            dim,
            num_classes,
            feature_mean,
            feature_scale,
            weights: (0..num_classes * dim).map(|_| init.sample(&mut rng)).collect(),
            bias: vec![0.0; num_classes],
        };

        let mut grad_w = vec![0.0; num_classes * dim];
        let mut grad_b = vec![0.0; num_classes];
        let mut probs = vec![0.0; num_classes];
        let scale = params.learning_rate / n as f64;
        for _ in 0..params.iterations {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            for (x, &y) in standardized.chunks_exact(dim).zip(labels) {
                head.softmax_into(x, &mut probs);
                for (c, p) in probs.iter().enumerate() {
                    let err = p - if c == y as usize { 1.0 } else { 0.0 };
                    grad_b[c] += err;
                    for (g, xi) in grad_w[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                        *g += err * xi;
                    }
                }
            }
            for (w, g) in head.weights.iter_mut().zip(&grad_w) {
                *w -= scale * g;
            }
            for (b, g) in head.bias.iter_mut().zip(&grad_b) {
                *b -= scale * g;
            }
        }
        Ok(head)
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn logit(&self, class: usize, x: &[f64]) -> f64 {
        metric::dot(&self.weights[class * self.dim..(class + 1) * self.dim], x) + self.bias[class]
    }

    fn softmax_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.logit(c, x);
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
    }

    /// Arg-max class; ties go to the lower class.
    pub fn infer(&self, x: &[f64]) -> Result<u32> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let z = self.standardize(x);
        let mut best = (0usize, f64::NEG_INFINITY);
        for c in 0..self.num_classes {
            let l = self.logit(c, &z);
            if l > best.1 {
                best = (c, l);
            }
        }
        Ok(best.0 as u32)
    }
}

/// One head per known task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadRegistry {
    heads: BTreeMap<TaskId, LinearHead>,
}

impl HeadRegistry {
    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn get(&self, task: TaskId) -> Option<&LinearHead> {
        self.heads.get(&task)
    }

    pub fn insert(&mut self, task: TaskId, head: LinearHead) -> Option<LinearHead> {
        self.heads.insert(task, head)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, &LinearHead)> {
        self.heads.iter().map(|(&t, h)| (t, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_two_class() {
        // class 0 leans on coordinate 0, class 1 on coordinate 1
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            vectors.extend([0.9, 0.1 + 0.2 * t, 0.3 * t]);
            labels.push(0);
            vectors.extend([0.1 + 0.2 * t, 0.9, -0.3 * t]);
            labels.push(1);
        }
        let head = LinearHead::fit(3, &vectors, &labels, &HeadParams::default()).unwrap();
        let correct = vectors
            .chunks_exact(3)
            .zip(&labels)
            .filter(|(x, &y)| head.infer(x).unwrap() == y)
            .count();
        assert!(correct as f64 / labels.len() as f64 >= 0.99);
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(
            LinearHead::fit(3, &[], &[], &HeadParams::default()),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn label_count_must_match() {
        assert!(LinearHead::fit(2, &[1.0, 0.0, 0.0, 1.0], &[0], &HeadParams::default()).is_err());
    }

    #[test]
    fn seeded_fit_is_reproducible() {
        let v = [1.0, 0.0, 0.0, 1.0, 0.7, 0.7];
        let l = [0, 1, 2];
        let a = LinearHead::fit(2, &v, &l, &HeadParams::default()).unwrap();
        let b = LinearHead::fit(2, &v, &l, &HeadParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn untrained_predicts_zero() {
        let h = LinearHead::untrained(4);
        assert_eq!(h.infer(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0);
        assert!(h.infer(&[1.0]).is_err());
    }
}
