//! Online, unsupervised task identification for domain-incremental
//! learning over embedding streams.
//!
//! An incoming batch of embeddings is clustered by cosine density
//! ([`clustering`]), summarized into centroids plus their nearest members
//! ([`signature`]), and compared with remembered tasks through a kernel
//! two-sample test ([`drift`]). Batches that match no remembered task start
//! a new one: its signature extends the nearest-exemplar task classifier
//! ([`classifier`]) and a fresh per-task head is registered ([`head`]). The
//! loop itself lives in [`orchestrator`]; [`synth`] provides synthetic
//! streams and evaluation reports, and [`io`] the file formats.

pub mod classifier;
pub mod clustering;
pub mod domain;
pub mod drift;
pub mod error;
pub mod head;
pub mod io;
pub mod metric;
pub mod orchestrator;
pub mod signature;
pub mod synth;

pub use classifier::TaskClassifier;
pub use clustering::{cluster_embeddings, ClusterParams};
pub use domain::{
    ClusterAssignment, DecisionKind, DriftVerdict, EmbeddingBatch, Ingestor, Mismatch, OnlineDecision, TaskId,
    TaskMemory, TaskSignature,
};
pub use drift::{calibrate_threshold, drift_check, mmd_statistic, Bandwidth, DriftParams};
pub use error::{Error, Result};
pub use head::{HeadParams, HeadRegistry, LinearHead};
pub use orchestrator::{Orchestrator, OrchestratorParams, StepRecord};
pub use signature::{build_signature, compute_centroids, nearest_neighbors};
