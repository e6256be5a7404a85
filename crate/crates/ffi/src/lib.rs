//! C ABI over the tadil engine.
//!
//! The engine is exposed as an opaque `TadilEngine` handle created by
//! `tadil_engine_new` or `tadil_engine_restore` and released with
//! `tadil_engine_free`. Every fallible call returns a `TadilStatus`; on
//! anything other than `TADIL_STATUS_OK` a description of the failure is
//! available from `tadil_last_error` on the same thread.
//!
//! Buffers returned by the library (`tadil_engine_snapshot`,
//! `tadil_engine_event_log`) are owned by the caller and must be released
//! with `tadil_bytes_free` / `tadil_string_free`.
//!
//! Input vectors are row-major `double` arrays whose width equals the
//! engine dimensionality. Panics never cross the boundary; they surface as
//! `TADIL_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use tadil::io::{restore_state, snapshot_state};
use tadil::{Bandwidth, DecisionKind, DriftParams, Error, HeadParams, Ingestor, Orchestrator, OrchestratorParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TadilStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    ZeroVector = 5,
    NoActiveTask = 6,
    UnknownTask = 7,
    EmptyTrainingSet = 8,
    Corrupt = 9,
    VersionMismatch = 10,
    Panic = 11,
    Internal = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TadilDecisionKind {
    KnownTask = 0,
    NewTask = 1,
}

/// Engine configuration. Obtain defaults from `tadil_params_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TadilParams {
    pub eps: f64,
    pub min_pts: u32,
    pub k: u32,
    pub permutations: u32,
    pub significance: f64,
    /// Used instead of permutation calibration when `use_fixed_threshold`.
    pub fixed_threshold: f64,
    pub use_fixed_threshold: bool,
    /// Kernel bandwidth; zero or negative selects the median heuristic.
    pub bandwidth: f64,
    pub seed: u64,
    pub head_learning_rate: f64,
    pub head_iterations: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TadilDecision {
    pub kind: TadilDecisionKind,
    pub task_id: u32,
    /// Set when the task classifier disagreed with the matched memory entry.
    pub warning: bool,
    pub classifier_predicted: u32,
    pub memory_matched: u32,
}

/// Opaque engine handle.
pub struct TadilEngine {
    orchestrator: Orchestrator,
    ingestor: Ingestor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> TadilStatus {
    match err {
        Error::DimensionMismatch { .. } => TadilStatus::DimensionMismatch,
        Error::NonFinite { .. } => TadilStatus::NonFinite,
        Error::ZeroVector { .. } => TadilStatus::ZeroVector,
        Error::NoActiveTask => TadilStatus::NoActiveTask,
        Error::UnknownTask(_) => TadilStatus::UnknownTask,
        Error::EmptyTrainingSet => TadilStatus::EmptyTrainingSet,
        Error::Corrupt(_) => TadilStatus::Corrupt,
        Error::VersionMismatch { .. } => TadilStatus::VersionMismatch,
        Error::EmptyBatch | Error::InvalidParameter(_) | Error::DegenerateBandwidth(_) => TadilStatus::InvalidArgument,
        _ => TadilStatus::Internal,
    }
}

/// Runs `body`, recording errors and converting panics.
fn guard(body: impl FnOnce() -> Result<(), TadilStatus>) -> TadilStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TadilStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_last_error("panic inside tadil".into());
            TadilStatus::Panic
        }
    }
}

fn fail(err: Error) -> TadilStatus {
    let status = status_of(&err);
    set_last_error(err.to_string());
    status
}

fn null(what: &str) -> TadilStatus {
    set_last_error(format!("{what} is NULL"));
    TadilStatus::NullPointer
}

impl From<&TadilParams> for OrchestratorParams {
    fn from(p: &TadilParams) -> Self {
        OrchestratorParams {
            cluster: tadil::ClusterParams {
                eps: p.eps,
                min_pts: p.min_pts as usize,
            },
            drift: DriftParams {
                bandwidth: if p.bandwidth > 0.0 {
                    Bandwidth::Fixed(p.bandwidth)
                } else {
                    Bandwidth::Auto
                },
                permutations: p.permutations as usize,
                significance: p.significance,
                fixed_threshold: p.use_fixed_threshold.then_some(p.fixed_threshold),
                rng_seed: p.seed,
            },
            k: p.k as usize,
            head: HeadParams {
                learning_rate: p.head_learning_rate,
                iterations: p.head_iterations as usize,
                init_seed: p.seed,
            },
        }
    }
}

#[no_mangle]
pub extern "C" fn tadil_params_default() -> TadilParams {
    let d = OrchestratorParams::default();
    TadilParams {
        eps: d.cluster.eps,
        min_pts: d.cluster.min_pts as u32,
        k: d.k as u32,
        permutations: d.drift.permutations as u32,
        significance: d.drift.significance,
        fixed_threshold: 0.0,
        use_fixed_threshold: false,
        bandwidth: 0.0,
        seed: d.drift.rng_seed,
        head_learning_rate: d.head.learning_rate,
        head_iterations: d.head.iterations as u32,
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tadil_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates an engine. `params` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_new(
    dim: u32,
    params: *const TadilParams,
    out: *mut *mut TadilEngine,
) -> TadilStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = match params.as_ref() {
            Some(p) => OrchestratorParams::from(p),
            None => OrchestratorParams::default(),
        };
        let orchestrator = Orchestrator::new(dim as usize, params).map_err(fail)?;
        let engine = TadilEngine {
            orchestrator,
            ingestor: Ingestor::new(dim as usize),
        };
        *out = Box::into_raw(Box::new(engine));
        Ok(())
    })
}

/// Releases an engine. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_free(engine: *mut TadilEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Processes one batch of `rows` embeddings. `class_labels` may be NULL;
/// when given (one per row) and the batch starts a new task, the new head
/// is trained on them.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_step(
    engine: *mut TadilEngine,
    data: *const f64,
    rows: usize,
    class_labels: *const u32,
    out: *mut TadilDecision,
) -> TadilStatus {
    guard(|| {
        let engine = engine.as_mut().ok_or_else(|| null("engine"))?;
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dim = engine.orchestrator.dim();
        let raw = slice::from_raw_parts(data, rows * dim).to_vec();
        let labels = (!class_labels.is_null()).then(|| slice::from_raw_parts(class_labels, rows));
        // keep the batch counter unchanged if the step fails
        let mut ingestor = engine.ingestor.clone();
        let batch = ingestor.normalize_batch(raw, None).map_err(fail)?;
        let decision = engine
            .orchestrator
            .online_step_with_labels(&batch, labels)
            .map_err(fail)?;
        engine.ingestor = ingestor;
        *out = TadilDecision {
            kind: match decision.kind {
                DecisionKind::KnownTask => TadilDecisionKind::KnownTask,
                DecisionKind::NewTask => TadilDecisionKind::NewTask,
            },
            task_id: decision.task_id,
            warning: decision.warning.is_some(),
            classifier_predicted: decision.warning.map_or(decision.task_id, |w| w.classifier_predicted),
            memory_matched: decision.warning.map_or(decision.task_id, |w| w.memory_matched),
        };
        Ok(())
    })
}

/// Classifies one vector with the active task's head.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_infer(
    engine: *const TadilEngine,
    x: *const f64,
    dim: usize,
    out_label: *mut u32,
) -> TadilStatus {
    guard(|| {
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        if out_label.is_null() {
            return Err(null("out_label"));
        }
        let label = engine.orchestrator.infer(slice::from_raw_parts(x, dim)).map_err(fail)?;
        *out_label = label;
        Ok(())
    })
}

/// Retrains the head of `task` on `rows` vectors with one label each.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_train_head(
    engine: *mut TadilEngine,
    task: u32,
    data: *const f64,
    rows: usize,
    labels: *const u32,
) -> TadilStatus {
    guard(|| {
        let engine = engine.as_mut().ok_or_else(|| null("engine"))?;
        let dim = engine.orchestrator.dim();
        let (vectors, labels): (&[f64], &[u32]) = if rows == 0 {
            (&[], &[])
        } else {
            if data.is_null() || labels.is_null() {
                return Err(null("data or labels"));
            }
            (
                slice::from_raw_parts(data, rows * dim),
                slice::from_raw_parts(labels, rows),
            )
        };
        engine.orchestrator.train_head(task, vectors, labels).map_err(fail)?;
        Ok(())
    })
}

/// Number of known tasks; 0 for a NULL engine.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_task_count(engine: *const TadilEngine) -> u32 {
    engine.as_ref().map_or(0, |e| e.orchestrator.memory().len() as u32)
}

#[no_mangle]
pub unsafe extern "C" fn tadil_engine_active_task(engine: *const TadilEngine, out: *mut u32) -> TadilStatus {
    guard(|| {
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = engine
            .orchestrator
            .active_task()
            .ok_or_else(|| fail(Error::NoActiveTask))?;
        Ok(())
    })
}

/// Serializes the engine into a newly allocated buffer.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_snapshot(
    engine: *const TadilEngine,
    out_buf: *mut *mut u8,
    out_len: *mut usize,
) -> TadilStatus {
    guard(|| {
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        if out_buf.is_null() || out_len.is_null() {
            return Err(null("out_buf or out_len"));
        }
        let bytes = snapshot_state(&engine.orchestrator).into_boxed_slice();
        *out_len = bytes.len();
        *out_buf = Box::into_raw(bytes) as *mut u8;
        Ok(())
    })
}

/// Rebuilds an engine from a snapshot buffer.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_restore(buf: *const u8, len: usize, out: *mut *mut TadilEngine) -> TadilStatus {
    guard(|| {
        if buf.is_null() {
            return Err(null("buf"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let orchestrator = restore_state(slice::from_raw_parts(buf, len)).map_err(fail)?;
        let next_batch = orchestrator.event_log().last().map_or(0, |r| r.batch_id + 1);
        let ingestor = Ingestor::starting_at(orchestrator.dim(), next_batch);
        *out = Box::into_raw(Box::new(TadilEngine { orchestrator, ingestor }));
        Ok(())
    })
}

/// Frees a buffer returned by `tadil_engine_snapshot`.
#[no_mangle]
pub unsafe extern "C" fn tadil_bytes_free(buf: *mut u8, len: usize) {
    if !buf.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf, len)));
    }
}

/// The event log as line-delimited JSON in a newly allocated string.
#[no_mangle]
pub unsafe extern "C" fn tadil_engine_event_log(engine: *const TadilEngine, out: *mut *mut c_char) -> TadilStatus {
    guard(|| {
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CString::new(engine.orchestrator.event_log_jsonl()).expect("JSON has no interior nul");
        *out = text.into_raw();
        Ok(())
    })
}

/// Frees a string returned by `tadil_engine_event_log`.
#[no_mangle]
pub unsafe extern "C" fn tadil_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
