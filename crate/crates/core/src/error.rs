use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} has zero norm")]
    ZeroVector { row: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("clustering produced no clusters")]
    NoClusters,

    #[error("kernel bandwidth must be positive, got {0}")]
    DegenerateBandwidth(f64),

    #[error("drift check needs at least 2 pooled neighbors per side (got {left} and {right})")]
    TooFewNeighbors { left: usize, right: usize },

    #[error("task {0} is already trained")]
    DuplicateTask(u32),

    #[error("task classifier has no trained tasks")]
    EmptyClassifier,

    #[error("no active task")]
    NoActiveTask,

    #[error("unknown task {0}")]
    UnknownTask(u32),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),

    #[error("file truncated at byte offset {offset}")]
    TruncatedFile { offset: u64 },

    #[error("snapshot version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
