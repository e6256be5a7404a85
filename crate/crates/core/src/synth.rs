//! Synthetic embedding streams, scenario sequencing and evaluation reports.
//!
//! Each synthetic task is an isotropic Gaussian blob around an orthogonal
//! mean, normalized onto the unit sphere. Class labels for head training are
//! the arg-max projection of a row's noise onto a few task-specific
//! directions orthogonal to the mean, which makes them linearly separable
//! on the sphere.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::TaskClassifier;
use crate::domain::{BatchId, DecisionKind, EmbeddingBatch, OnlineDecision, TaskId, TaskSignature};
use crate::drift::{drift_check, DriftParams};
use crate::error::{Error, Result};
use crate::metric;
use crate::orchestrator::{Orchestrator, OrchestratorParams, StepRecord};
use crate::signature::build_signature;

pub const DEFAULT_BATCH_SIZE: usize = 200;
pub const DEFAULT_SPREAD: f64 = 0.05;

/// Task order of the repetition scenario (1-based, as published).
pub const REPETITION_SEQUENCE: [TaskId; 10] = [1, 2, 3, 2, 4, 4, 5, 5, 5, 6];

const CLASS_DIRECTION_SALT: u64 = 0x5eed_c1a5_5d1e_c7a1;

/// SplitMix64 finalizer; derives independent child seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    pub task_id: TaskId,
    pub mean: Vec<f64>,
    /// Per-coordinate standard deviation before normalization.
    pub spread: f64,
    pub num_classes: u32,
}

impl SyntheticTaskSpec {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spread must be positive, got {}",
                self.spread
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be at least 1".into()));
        }
        if self.mean.is_empty() {
            return Err(Error::InvalidParameter("mean must be nonempty".into()));
        }
        Ok(())
    }
}

/// `n` mutually orthogonal means of norm `sqrt(dim)`.
///
/// Uses Sylvester-Hadamard rows (all entries ±1) when `dim` is a power of
/// two, otherwise scaled basis vectors.
pub fn orthogonal_means(n: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    if n > dim {
        return Err(Error::InvalidParameter(format!(
            "cannot place {n} orthogonal means in {dim} dimensions"
        )));
    }
    if dim.is_power_of_two() {
        Ok((0..n)
            .map(|i| {
                (0..dim)
                    .map(|j| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect())
    } else {
        let scale = (dim as f64).sqrt();
        Ok((0..n)
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[i] = scale;
                v
            })
            .collect())
    }
}

pub fn default_task_specs(n: usize, dim: usize, spread: f64, num_classes: u32) -> Result<Vec<SyntheticTaskSpec>> {
    orthogonal_means(n, dim)?
        .into_iter()
        .enumerate()
        .map(|(i, mean)| {
            let spec = SyntheticTaskSpec {
                task_id: i as TaskId,
                mean,
                spread,
                num_classes,
            };
            spec.validate().map(|_| spec)
        })
        .collect()
}

fn class_directions(spec: &SyntheticTaskSpec) -> Vec<Vec<f64>> {
    let dim = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(CLASS_DIRECTION_SALT, &[spec.task_id as u64]));
    let mean_sq = metric::dot(&spec.mean, &spec.mean);
    (0..spec.num_classes)
        .map(|_| {
            let mut w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if mean_sq > 0.0 {
                let proj = metric::dot(&w, &spec.mean) / mean_sq;
                w.iter_mut().zip(&spec.mean).for_each(|(wi, mi)| *wi -= proj * mi);
            }
            w
        })
        .collect()
}

/// A normalized Gaussian batch for `spec` plus per-row class labels.
pub fn generate_labeled_batch(
    spec: &SyntheticTaskSpec,
    batch_size: usize,
    seed: u64,
    batch_id: BatchId,
) -> Result<(EmbeddingBatch, Vec<u32>)> {
    spec.validate()?;
    if batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    let dim = spec.dim();
    let dirs = class_directions(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(batch_size * dim);
    let mut classes = Vec::with_capacity(batch_size);
    let mut noise = vec![0.0; dim];
    for _ in 0..batch_size {
        noise.iter_mut().for_each(|z| {
            let s: f64 = StandardNormal.sample(&mut rng);
            *z = spec.spread * s;
        });
        let class = dirs
            .iter()
            .enumerate()
            .map(|(c, w)| (c, metric::dot(&noise, w)))
            .fold(
                (0usize, f64::NEG_INFINITY),
                |best, (c, p)| if p > best.1 { (c, p) } else { best },
            )
            .0;
        classes.push(class as u32);
        data.extend(spec.mean.iter().zip(&noise).map(|(m, z)| m + z));
    }
    let batch = EmbeddingBatch::from_raw(batch_id, dim, data, Some(vec![spec.task_id; batch_size]))?;
    Ok((batch, classes))
}

pub fn generate_batch(
    spec: &SyntheticTaskSpec,
    batch_size: usize,
    seed: u64,
    batch_id: BatchId,
) -> Result<EmbeddingBatch> {
    generate_labeled_batch(spec, batch_size, seed, batch_id).map(|(b, _)| b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub sequence: Vec<TaskId>,
    pub batches_per_step: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(sequence: Vec<TaskId>, seed: u64) -> Self {
        Self {
            sequence,
            batches_per_step: 1,
            batch_size: DEFAULT_BATCH_SIZE,
            seed,
        }
    }

    /// Maps each task in the sequence to its first-occurrence rank.
    pub fn first_occurrence_ids(&self) -> BTreeMap<TaskId, TaskId> {
        let mut ids = BTreeMap::new();
        for &t in &self.sequence {
            let next = ids.len() as TaskId;
            ids.entry(t).or_insert(next);
        }
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: usize,
    pub batch_id: BatchId,
    pub true_task: TaskId,
    pub expected_task: TaskId,
    pub decision: OnlineDecision,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub steps: Vec<StepOutcome>,
    pub events: Vec<StepRecord>,
    pub new_tasks: usize,
    pub known_tasks: usize,
    pub warnings: usize,
    pub accuracy: f64,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn new_task_order(&self) -> Vec<TaskId> {
        self.steps
            .iter()
            .filter(|s| s.decision.kind == DecisionKind::NewTask)
            .map(|s| s.true_task)
            .collect()
    }
}

pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub orchestrator: Orchestrator,
}

fn spec_index(specs: &[SyntheticTaskSpec]) -> Result<(BTreeMap<TaskId, &SyntheticTaskSpec>, usize)> {
    let dim = specs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no task specs".into()))?
        .dim();
    let mut map = BTreeMap::new();
    for s in specs {
        s.validate()?;
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: s.dim(),
            });
        }
        map.insert(s.task_id, s);
    }
    Ok((map, dim))
}

/// Feeds generated batches through a fresh orchestrator in sequence order.
pub fn run_scenario(
    scenario: &Scenario,
    specs: &[SyntheticTaskSpec],
    params: &OrchestratorParams,
) -> Result<ScenarioRun> {
    let (by_id, dim) = spec_index(specs)?;
    if scenario.batches_per_step == 0 || scenario.batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batches_per_step and batch_size must be positive".into(),
        ));
    }
    if let Some(missing) = scenario.sequence.iter().find(|t| !by_id.contains_key(t)) {
        return Err(Error::UnknownTask(*missing));
    }
    let expected_ids = scenario.first_occurrence_ids();
    let mut orch = Orchestrator::new(dim, *params)?;
    let mut steps = Vec::new();
    let mut batch_id: BatchId = 0;
    for (step, &task) in scenario.sequence.iter().enumerate() {
        let spec = by_id[&task];
        for b in 0..scenario.batches_per_step {
            let seed = derive_seed(scenario.seed, &[step as u64, b as u64]);
            let (batch, classes) = generate_labeled_batch(spec, scenario.batch_size, seed, batch_id)?;
            let decision = orch.online_step_with_labels(&batch, Some(&classes))?;
            let expected_task = expected_ids[&task];
            steps.push(StepOutcome {
                step,
                batch_id,
                true_task: task,
                expected_task,
                decision,
                correct: decision.task_id == expected_task,
            });
            batch_id += 1;
        }
    }
    let count = |k: DecisionKind| steps.iter().filter(|s| s.decision.kind == k).count();
    let report = ScenarioReport {
        scenario: scenario.clone(),
        new_tasks: count(DecisionKind::NewTask),
        known_tasks: count(DecisionKind::KnownTask),
        warnings: steps.iter().filter(|s| s.decision.warning.is_some()).count(),
        accuracy: steps.iter().filter(|s| s.correct).count() as f64 / steps.len().max(1) as f64,
        events: orch.event_log().to_vec(),
        steps,
    };
    Ok(ScenarioRun {
        report,
        orchestrator: orch,
    })
}

/// Signed drift scores between task signatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn size(&self) -> usize {
        self.scores.len()
    }

    /// True when `same(i, j)` entries are negative and all others positive.
    pub fn sign_pattern_holds(&self, same: impl Fn(usize, usize) -> bool) -> bool {
        self.scores.iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(j, &s)| if same(i, j) { s < 0.0 } else { s > 0.0 })
        })
    }

    pub fn to_csv(&self) -> String {
        let n = self.size();
        let mut out = String::from("task");
        for j in 0..n {
            let _ = write!(out, ",{j}");
        }
        out.push('\n');
        for (i, row) in self.scores.iter().enumerate() {
            let _ = write!(out, "{i}");
            for s in row {
                let _ = write!(out, ",{s}");
            }
            out.push('\n');
        }
        out
    }
}

/// Entry `(i, j)` is the drift score of signature `j` against `i`; the
/// diagonal compares each signature with `fresh[i]`, an independently drawn
/// sample of the same task.
pub fn drift_confusion_matrix(
    signatures: &[TaskSignature],
    fresh: &[TaskSignature],
    params: &DriftParams,
) -> Result<ScoreMatrix> {
    let n = signatures.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two signatures".into()));
    }
    if fresh.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} fresh signatures for {} tasks",
            fresh.len(),
            n
        )));
    }
    let mut scores = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let other = if i == j { &fresh[i] } else { &signatures[j] };
            scores[i][j] = drift_check(&signatures[i], other, params)?.score;
        }
    }
    Ok(ScoreMatrix { scores })
}

/// Builds memory and fresh signatures for every spec and scores them.
pub fn synthetic_drift_matrix(
    specs: &[SyntheticTaskSpec],
    batch_size: usize,
    seed: u64,
    params: &OrchestratorParams,
) -> Result<ScoreMatrix> {
    let mut memory = Vec::with_capacity(specs.len());
    let mut fresh = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        for (round, out) in [&mut memory, &mut fresh].into_iter().enumerate() {
            let batch_seed = derive_seed(seed, &[i as u64, round as u64]);
            let batch = generate_batch(spec, batch_size, batch_seed, (2 * i + round) as BatchId)?;
            out.push(build_signature(&batch, &params.cluster, params.k, spec.task_id)?);
        }
    }
    drift_confusion_matrix(&memory, &fresh, &params.drift)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecall {
    pub task: TaskId,
    pub correct: usize,
    pub total: usize,
    pub recall: f64,
    /// Recall strictly above `1 / num_tasks`.
    pub sufficient: bool,
}

/// Per-sample recall for one classifier stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub num_tasks: usize,
    pub threshold: f64,
    pub tasks: Vec<TaskRecall>,
}

impl RecallReport {
    /// `tallies` holds `(task, correct, total)`; tasks with no samples are
    /// left out.
    pub fn from_tallies(num_tasks: usize, tallies: impl IntoIterator<Item = (TaskId, usize, usize)>) -> Self {
        let threshold = 1.0 / num_tasks as f64;
        let tasks = tallies
            .into_iter()
            .filter(|&(_, _, total)| total > 0)
            .map(|(task, correct, total)| {
                let recall = correct as f64 / total as f64;
                TaskRecall {
                    task,
                    correct,
                    total,
                    recall,
                    // compare counts exactly: correct / total > 1 / T
                    sufficient: correct * num_tasks > total,
                }
            })
            .collect();
        Self {
            num_tasks,
            threshold,
            tasks,
        }
    }

    pub fn all_sufficient(&self) -> bool {
        self.tasks.iter().all(|t| t.sufficient)
    }

    pub fn flagged(&self) -> Vec<TaskId> {
        self.tasks.iter().filter(|t| !t.sufficient).map(|t| t.task).collect()
    }
}

/// Scores `clf` on labeled evaluation batches. Row labels must use the
/// classifier's task ids; unlabeled batches are skipped.
pub fn recall_report(clf: &TaskClassifier, eval_batches: &[EmbeddingBatch]) -> Result<RecallReport> {
    let mut tallies: BTreeMap<TaskId, (usize, usize)> = BTreeMap::new();
    for batch in eval_batches {
        let Some(labels) = batch.labels() else { continue };
        let predicted = clf.predict_rows(batch)?;
        for (&truth, &pred) in labels.iter().zip(&predicted) {
            let entry = tallies.entry(truth).or_default();
            entry.1 += 1;
            if truth == pred {
                entry.0 += 1;
            }
        }
    }
    Ok(RecallReport::from_tallies(
        clf.num_tasks(),
        tallies.into_iter().map(|(t, (c, n))| (t, c, n)),
    ))
}

/// Stage-by-task recall table as CSV.
pub fn recall_table_csv(stages: &[RecallReport]) -> String {
    let mut out = String::from("num_tasks,task,recall,threshold,sufficient\n");
    for stage in stages {
        for t in &stage.tasks {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                stage.num_tasks, t.task, t.recall, stage.threshold, t.sufficient
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_means_are_orthogonal() {
        let means = orthogonal_means(6, 16).unwrap();
        for i in 0..6 {
            assert_eq!(metric::dot(&means[i], &means[i]), 16.0);
            for j in i + 1..6 {
                assert_eq!(metric::dot(&means[i], &means[j]), 0.0);
            }
        }
        let basis = orthogonal_means(3, 12).unwrap();
        assert_eq!(metric::dot(&basis[0], &basis[2]), 0.0);
        assert!(orthogonal_means(9, 8).is_err());
    }

    #[test]
    fn vanishing_spread_collapses_to_mean() {
        let spec = SyntheticTaskSpec {
            task_id: 0,
            mean: vec![3.0, 4.0, 0.0, 0.0],
            spread: 1e-9,
            num_classes: 1,
        };
        let b = generate_batch(&spec, 50, 1, 0).unwrap();
        for row in b.rows() {
            assert!((row[0] - 0.6).abs() < 1e-6 && (row[1] - 0.8).abs() < 1e-6);
        }
        assert_eq!(b.true_task(), Some(0));
    }

    #[test]
    fn generation_is_seeded() {
        let spec = &default_task_specs(2, 32, 0.05, 3).unwrap()[1];
        let a = generate_labeled_batch(spec, 40, 9, 0).unwrap();
        let b = generate_labeled_batch(spec, 40, 9, 0).unwrap();
        assert_eq!(a, b);
        let c = generate_batch(spec, 40, 10, 0).unwrap();
        assert_ne!(a.0, c);
    }

    #[test]
    fn class_labels_cover_all_classes() {
        let spec = &default_task_specs(1, 64, 0.05, 3).unwrap()[0];
        let (_, classes) = generate_labeled_batch(spec, 200, 4, 0).unwrap();
        for c in 0..3 {
            assert!(classes.iter().filter(|&&k| k == c).count() > 20);
        }
    }

    #[test]
    fn first_occurrence_relabeling() {
        let s = Scenario::new(REPETITION_SEQUENCE.to_vec(), 0);
        let ids = s.first_occurrence_ids();
        let mapped: Vec<_> = s.sequence.iter().map(|t| ids[t]).collect();
        assert_eq!(mapped, vec![0, 1, 2, 1, 3, 3, 4, 4, 4, 5]);
    }

    #[test]
    fn recall_thresholds() {
        let r = RecallReport::from_tallies(2, [(0, 99, 100), (1, 98, 100)]);
        assert_eq!(r.threshold, 0.5);
        assert!(r.all_sufficient());
        let r = RecallReport::from_tallies(6, [(0, 1, 6), (1, 2, 6)]);
        assert!((r.threshold - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.flagged(), vec![0]);
        let r = RecallReport::from_tallies(4, [(2, 50, 200), (3, 0, 0)]);
        assert_eq!(r.tasks.len(), 1);
        assert!(!r.tasks[0].sufficient);
    }

    #[test]
    fn derive_seed_separates_parts() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
        assert_eq!(derive_seed(5, &[3]), derive_seed(5, &[3]));
    }
}
