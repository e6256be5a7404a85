//! The online task-identification loop.
//!
//! Each incoming batch is summarized into a signature and compared against
//! memory, most recent task first. The first memory entry that does not
//! drift is taken as the batch's task (after cross-checking with the task
//! classifier). If every entry drifts, the batch starts a new task: its
//! signature is stored, the classifier is extended and a new head is added.

use serde::{Deserialize, Serialize};

use crate::classifier::TaskClassifier;
use crate::clustering::ClusterParams;
use crate::domain::{BatchId, DecisionKind, EmbeddingBatch, Mismatch, OnlineDecision, TaskId, TaskMemory};
use crate::drift::{drift_check, DriftParams};
use crate::error::{Error, Result};
use crate::head::{HeadParams, HeadRegistry, LinearHead};
use crate::signature::{build_signature, DEFAULT_K};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorParams {
    pub cluster: ClusterParams,
    pub drift: DriftParams,
    pub k: usize,
    pub head: HeadParams,
}

impl Default for OrchestratorParams {
    fn default() -> Self {
        Self {
            cluster: ClusterParams::default(),
            drift: DriftParams::default(),
            k: DEFAULT_K,
            head: HeadParams::default(),
        }
    }
}

impl OrchestratorParams {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        self.drift.validate()?;
        self.head.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One drift comparison made during a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub task_id: TaskId,
    pub statistic: f64,
    pub threshold: f64,
    pub score: f64,
    pub drifted: bool,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub batch_id: BatchId,
    pub kind: DecisionKind,
    pub task_id: TaskId,
    pub comparisons: Vec<Comparison>,
    pub classifier_prediction: Option<TaskId>,
    pub warning: bool,
    pub mismatch: Option<Mismatch>,
}

impl StepRecord {
    pub fn decision(&self) -> OnlineDecision {
        OnlineDecision {
            kind: self.kind,
            task_id: self.task_id,
            warning: self.mismatch,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("step records always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orchestrator {
    dim: usize,
    params: OrchestratorParams,
    memory: TaskMemory,
    classifier: TaskClassifier,
    heads: HeadRegistry,
    active_task: Option<TaskId>,
    event_log: Vec<StepRecord>,
}

impl Orchestrator {
    pub fn new(dim: usize, params: OrchestratorParams) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        Ok(Self {
            dim,
            params,
            memory: TaskMemory::new(),
            classifier: TaskClassifier::new(),
            heads: HeadRegistry::default(),
            active_task: None,
            event_log: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &OrchestratorParams {
        &self.params
    }

    pub fn memory(&self) -> &TaskMemory {
        &self.memory
    }

    pub fn classifier(&self) -> &TaskClassifier {
        &self.classifier
    }

    pub fn heads(&self) -> &HeadRegistry {
        &self.heads
    }

    pub fn active_task(&self) -> Option<TaskId> {
        self.active_task
    }

    pub fn event_log(&self) -> &[StepRecord] {
        &self.event_log
    }

    pub fn online_step(&mut self, batch: &EmbeddingBatch) -> Result<OnlineDecision> {
        self.online_step_with_labels(batch, None)
    }

    /// Like [`online_step`](Self::online_step); when the batch starts a new
    /// task and `class_labels` is given, the new head is trained on the
    /// batch with those labels. Otherwise the new head starts untrained.
    ///
    /// On error the state is left exactly as it was.
    pub fn online_step_with_labels(
        &mut self,
        batch: &EmbeddingBatch,
        class_labels: Option<&[u32]>,
    ) -> Result<OnlineDecision> {
        if batch.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: batch.dim(),
            });
        }
        let next_id = self.memory.next_task_id();
        let signature = build_signature(batch, &self.params.cluster, self.params.k, next_id)?;

        let mut comparisons = Vec::new();
        for stored in self.memory.iter_recent_first() {
            let verdict = drift_check(&signature, stored, &self.params.drift)?;
            comparisons.push(Comparison {
                task_id: stored.task_id,
                statistic: verdict.statistic,
                threshold: verdict.threshold,
                score: verdict.score,
                drifted: verdict.drifted,
            });
            if verdict.drifted {
                continue;
            }
            let matched = stored.task_id;
            let predicted = self.classifier.predict_batch(batch)?;
            let mismatch = (predicted != matched).then_some(Mismatch {
                classifier_predicted: predicted,
                memory_matched: matched,
            });
            self.active_task = Some(matched);
            self.event_log.push(StepRecord {
                batch_id: batch.batch_id(),
                kind: DecisionKind::KnownTask,
                task_id: matched,
                comparisons,
                classifier_prediction: Some(predicted),
                warning: mismatch.is_some(),
                mismatch,
            });
            return Ok(OnlineDecision {
                kind: DecisionKind::KnownTask,
                task_id: matched,
                warning: mismatch,
            });
        }

        // every stored task drifted (or memory is empty): mint a new task
        let head = match class_labels {
            Some(labels) => LinearHead::fit(self.dim, batch.as_slice(), labels, &self.params.head)?,
            None => LinearHead::untrained(self.dim),
        };
        let mut classifier = self.classifier.clone();
        classifier.fit_increment(&signature)?;

        let id = self.memory.push(signature);
        debug_assert_eq!(id, next_id);
        self.classifier = classifier;
        self.heads.insert(id, head);
        self.active_task = Some(id);
        self.event_log.push(StepRecord {
            batch_id: batch.batch_id(),
            kind: DecisionKind::NewTask,
            task_id: id,
            comparisons,
            classifier_prediction: None,
            warning: false,
            mismatch: None,
        });
        Ok(OnlineDecision {
            kind: DecisionKind::NewTask,
            task_id: id,
            warning: None,
        })
    }

    /// Routes `x` through the head of the active task.
    pub fn infer(&self, x: &[f64]) -> Result<u32> {
        let task = self.active_task.ok_or(Error::NoActiveTask)?;
        self.heads.get(task).ok_or(Error::UnknownTask(task))?.infer(x)
    }

    /// Replaces the head of `task` with one trained on `vectors`/`labels`.
    pub fn train_head(&mut self, task: TaskId, vectors: &[f64], labels: &[u32]) -> Result<&LinearHead> {
        if self.heads.get(task).is_none() {
            return Err(Error::UnknownTask(task));
        }
        let head = LinearHead::fit(self.dim, vectors, labels, &self.params.head)?;
        self.heads.insert(task, head);
        Ok(self.heads.get(task).expect("just inserted"))
    }

    /// Checks that memory, classifier and head registry describe the same
    /// tasks and that the active task is one of them.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.memory.len();
        if self.classifier.num_tasks() != n || self.heads.len() != n {
            return Err(format!(
                "cardinality mismatch: memory {}, classifier {}, heads {}",
                n,
                self.classifier.num_tasks(),
                self.heads.len()
            ));
        }
        for (i, sig) in self.memory.iter().enumerate() {
            if sig.task_id as usize != i {
                return Err(format!("memory slot {i} holds task {}", sig.task_id));
            }
            if !self.classifier.trained_tasks().contains(&sig.task_id) || self.heads.get(sig.task_id).is_none() {
                return Err(format!("task {} missing from classifier or heads", sig.task_id));
            }
            if sig.dim != self.dim {
                return Err(format!(
                    "task {} has dim {}, expected {}",
                    sig.task_id, sig.dim, self.dim
                ));
            }
        }
        if let Some(t) = self.active_task {
            if t as usize >= n {
                return Err(format!("active task {t} is not trained"));
            }
        }
        Ok(())
    }

    /// Event log as line-delimited JSON, one record per step.
    pub fn event_log_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.event_log {
            out.push_str(&rec.to_json_line());
            out.push('\n');
        }
        out
    }
}
