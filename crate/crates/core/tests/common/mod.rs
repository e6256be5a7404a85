//! Brute-force reference implementations and fixtures shared by the
//! integration suites.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tadil::domain::TaskSignature;
use tadil::synth::{default_task_specs, SyntheticTaskSpec};
use tadil::EmbeddingBatch;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize, center: &[f64], sigma: f64) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let z: f64 = StandardNormal.sample(rng);
            center.get(j).copied().unwrap_or(0.0) + sigma * z
        })
        .collect()
}

/// Reference DBSCAN over `1 - u.v`, written from the definition with no
/// shared code: full distance matrix, union-find over core points, border
/// points attached to the adjacent component whose lowest core index is
/// smallest, labels renumbered by first appearance.
pub fn reference_dbscan(rows: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i32> {
    let m = rows.len();
    let mut dist = vec![vec![0.0f64; m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut dot = 0.0;
            for (x, y) in rows[i].iter().zip(&rows[j]) {
                dot += x * y;
            }
            dist[i][j] = 1.0 - dot;
        }
    }
    let near = |i: usize, j: usize| dist[i][j] <= eps;
    let core: Vec<bool> = (0..m)
        .map(|i| (0..m).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();

    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..m {
        for j in 0..m {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    // component id = its lowest core index
    let mut comp = vec![usize::MAX; m];
    for i in 0..m {
        if core[i] {
            let root = find(&mut parent, i);
            comp[i] = (0..m).find(|&j| core[j] && find(&mut parent, j) == root).unwrap();
        }
    }
    for i in 0..m {
        if !core[i] {
            comp[i] = (0..m)
                .filter(|&j| core[j] && near(i, j))
                .map(|j| comp[j])
                .min()
                .unwrap_or(usize::MAX);
        }
    }
    let mut names = std::collections::BTreeMap::new();
    comp.iter()
        .map(|&c| {
            if c == usize::MAX {
                -1
            } else {
                let next = names.len() as i32;
                *names.entry(c).or_insert(next)
            }
        })
        .collect()
}

/// Canonical relabeling by first appearance, noise kept at -1.
pub fn canonical(labels: &[i32]) -> Vec<i32> {
    let mut names = std::collections::BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            if l < 0 {
                -1
            } else {
                let next = names.len() as i32;
                *names.entry(l).or_insert(next)
            }
        })
        .collect()
}

/// Clustered unit vectors with some scattered outliers, shuffled.
pub fn random_cluster_rows(seed: u64, max_rows: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let m = r.gen_range(1..=max_rows);
    let clusters = r.gen_range(1..=4);
    let centers: Vec<Vec<f64>> = (0..clusters).map(|_| gaussian(&mut r, dim, &[], 1.0)).collect();
    // total noise norm around `spread`, so cosine distances straddle eps
    let spread = r.gen_range(0.1..0.8);
    let per_coord = spread / (dim as f64).sqrt();
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let v = if r.gen_bool(0.15) {
            gaussian(&mut r, dim, &[], 1.0)
        } else {
            let c = &centers[r.gen_range(0..clusters)];
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let unit: Vec<f64> = c.iter().map(|x| x / norm).collect();
            gaussian(&mut r, dim, &unit, per_coord)
        };
        rows.push(v);
    }
    rows
}

/// Exhaustive k-NN: sort all members by (L1 distance, row index).
pub fn reference_knn(members: &[(usize, Vec<f64>)], centroid: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = members
        .iter()
        .map(|(row, v)| {
            let mut d = 0.0;
            for c in 0..v.len() {
                d += (v[c] - centroid[c]).abs();
            }
            (*row, d)
        })
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Wraps a point set as a one-cluster signature so `drift_check` sees
/// exactly these points.
pub fn point_signature(task_id: u32, points: Vec<Vec<f64>>) -> TaskSignature {
    let dim = points[0].len();
    let n = points.len();
    let mut centroid = vec![0.0; dim];
    for p in &points {
        centroid.iter_mut().zip(p).for_each(|(c, x)| *c += x);
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    TaskSignature {
        task_id,
        dim,
        k: n,
        created_at: 0,
        centroids: vec![centroid],
        neighbor_sets: vec![points],
        neighbor_rows: vec![(0..n).collect()],
    }
}

/// Default synthetic tasks renumbered to `first_id..`.
pub fn specs_from(first_id: u32, n: usize, dim: usize, classes: u32) -> Vec<SyntheticTaskSpec> {
    let mut specs = default_task_specs(n, dim, 0.05, classes).unwrap();
    for (i, s) in specs.iter_mut().enumerate() {
        s.task_id = first_id + i as u32;
    }
    specs
}

pub fn rows_of(batch: &EmbeddingBatch) -> Vec<Vec<f64>> {
    batch.rows().map(<[f64]>::to_vec).collect()
}

pub fn f64_bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
