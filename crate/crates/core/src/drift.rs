//! Two-sample drift test between task signatures.
//!
//! The statistic is the unbiased (U-statistic) estimate of squared MMD under
//! a Gaussian RBF kernel over the pooled neighbor sets of each signature. The
//! decision threshold is the `1 - significance` quantile of the same statistic
//! over random re-splits of the pooled sample, so a negative score means the
//! observed split is unremarkable and a positive one means drift.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DriftVerdict, TaskSignature};
use crate::error::{Error, Result};
use crate::metric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Median pairwise Euclidean distance over the pooled sample.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub bandwidth: Bandwidth,
    pub permutations: usize,
    pub significance: f64,
    /// Skips permutation calibration when set.
    pub fixed_threshold: Option<f64>,
    pub rng_seed: u64,
}

impl Default for DriftParams {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::Auto,
            permutations: 100,
            significance: 0.05,
            fixed_threshold: None,
            rng_seed: 0,
        }
    }
}

impl DriftParams {
    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::InvalidParameter("permutations must be at least 1".into()));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "significance must lie in (0, 1), got {}",
                self.significance
            )));
        }
        if let Bandwidth::Fixed(bw) = self.bandwidth {
            if bw.is_nan() || bw <= 0.0 {
                return Err(Error::DegenerateBandwidth(bw));
            }
        }
        Ok(())
    }
}

#[inline]
pub fn gaussian_kernel(u: &[f64], v: &[f64], bandwidth: f64) -> f64 {
    (-metric::squared_euclidean(u, v) / (2.0 * bandwidth * bandwidth)).exp()
}

fn check_sides<V: AsRef<[f64]>>(a: &[V], b: &[V]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewNeighbors {
            left: a.len(),
            right: b.len(),
        });
    }
    let dim = a[0].as_ref().len();
    if let Some(bad) = a.iter().chain(b).map(|v| v.as_ref().len()).find(|&d| d != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad,
        });
    }
    Ok(())
}

/// Unbiased MMD² estimate; may be negative.
pub fn mmd_statistic<V: AsRef<[f64]>>(a: &[V], b: &[V], bandwidth: f64) -> Result<f64> {
    if bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(Error::DegenerateBandwidth(bandwidth));
    }
    check_sides(a, b)?;
    let within = |s: &[V]| {
        let mut sum = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                sum += gaussian_kernel(s[i].as_ref(), s[j].as_ref(), bandwidth);
            }
        }
        let n = s.len() as f64;
        2.0 * sum / (n * (n - 1.0))
    };
    let mut cross = 0.0;
    for u in a {
        for v in b {
            cross += gaussian_kernel(u.as_ref(), v.as_ref(), bandwidth);
        }
    }
    let cross = cross / (a.len() as f64 * b.len() as f64);
    Ok(within(a) + within(b) - 2.0 * cross)
}

/// Median of all pairwise Euclidean distances over `a ∪ b`.
///
/// Falls back to the mean positive distance when more than half the pairs
/// coincide, and to 1 when every point is identical.
pub fn median_heuristic<V: AsRef<[f64]>>(a: &[V], b: &[V]) -> f64 {
    let pool: Vec<&[f64]> = a.iter().chain(b).map(AsRef::as_ref).collect();
    let mut dists = Vec::with_capacity(pool.len() * pool.len().saturating_sub(1) / 2);
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            dists.push(metric::squared_euclidean(pool[i], pool[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_unstable_by(f64::total_cmp);
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    if median > 0.0 {
        return median;
    }
    let positive: Vec<f64> = dists.into_iter().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        1.0
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    }
}

pub fn resolve_bandwidth<V: AsRef<[f64]>>(a: &[V], b: &[V], bandwidth: Bandwidth) -> Result<f64> {
    match bandwidth {
        Bandwidth::Auto => Ok(median_heuristic(a, b)),
        Bandwidth::Fixed(bw) if bw > 0.0 => Ok(bw),
        Bandwidth::Fixed(bw) => Err(Error::DegenerateBandwidth(bw)),
    }
}

fn lexicographic<V: AsRef<[f64]>>(a: &[V], b: &[V]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .flat_map(|v| v.as_ref().iter())
            .zip(b.iter().flat_map(|v| v.as_ref().iter()))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Order statistic used as the `q` quantile of `values` (sorted in place).
fn upper_quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    // the epsilon keeps e.g. 0.95 * 100 from rounding up to 96
    let rank = ((q * values.len() as f64) - 1e-9).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

fn threshold_with_bandwidth<V: AsRef<[f64]> + Sync>(a: &[V], b: &[V], bandwidth: f64, params: &DriftParams) -> f64 {
    // Pool in a canonical order so that (a, b) and (b, a) calibrate identically.
    let (first, second) = if lexicographic(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let pool: Vec<&[f64]> = first.iter().chain(second).map(AsRef::as_ref).collect();
    let n = pool.len();
    let split = first.len();

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let k = gaussian_kernel(pool[i], pool[j], bandwidth);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let na = split as f64;
    let nb = (n - split) as f64;
    let mut stats: Vec<f64> = (0..params.permutations)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
            rng.set_stream(p as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut side = vec![false; n];
            for &i in &order[..split] {
                side[i] = true;
            }
            let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in i + 1..n {
                    let k = gram[i * n + j];
                    match (side[i], side[j]) {
                        (true, true) => xx += k,
                        (false, false) => yy += k,
                        _ => xy += k,
                    }
                }
            }
            2.0 * xx / (na * (na - 1.0)) + 2.0 * yy / (nb * (nb - 1.0)) - 2.0 * xy / (na * nb)
        })
        .collect();
    upper_quantile(&mut stats, 1.0 - params.significance)
}

/// Null quantile of the MMD statistic under random re-splits of `a ∪ b`,
/// or `params.fixed_threshold` when set.
pub fn calibrate_threshold<V: AsRef<[f64]> + Sync>(a: &[V], b: &[V], params: &DriftParams) -> Result<f64> {
    if let Some(t) = params.fixed_threshold {
        return Ok(t);
    }
    params.validate()?;
    check_sides(a, b)?;
    let bw = resolve_bandwidth(a, b, params.bandwidth)?;
    Ok(threshold_with_bandwidth(a, b, bw, params))
}

/// Compares the pooled neighbors of two signatures.
pub fn drift_check(sig: &TaskSignature, other: &TaskSignature, params: &DriftParams) -> Result<DriftVerdict> {
    params.validate()?;
    if sig.dim != other.dim {
        return Err(Error::DimensionMismatch {
            expected: sig.dim,
            actual: other.dim,
        });
    }
    let a = sig.pooled_neighbors();
    let b = other.pooled_neighbors();
    check_sides(&a, &b)?;
    let bw = resolve_bandwidth(&a, &b, params.bandwidth)?;
    let statistic = mmd_statistic(&a, &b, bw)?;
    let threshold = match params.fixed_threshold {
        Some(t) => t,
        None => threshold_with_bandwidth(&a, &b, bw, params),
    };
    Ok(DriftVerdict::new(statistic, threshold))
}
