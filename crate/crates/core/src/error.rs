use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: expected 3 tab-separated fields, found {found}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        found: usize,
    },
    #[error("training split is empty")]
    EmptyTrain,
    #[error("graph is already reciprocal-augmented")]
    AlreadyAugmented,
    #[error("graph must be reciprocal-augmented first")]
    NotAugmented,
    #[error("unknown {kind} `{name}` in split {split}")]
    UnknownSymbol {
        kind: &'static str,
        name: String,
        split: String,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pair-based operation requires an even dimension, found {0}")]
    OddDimension(usize),
    #[error("curvature mismatch: {0} vs {1}")]
    CurvatureMismatch(f64, f64),
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthetic(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("label index {index} out of range for {len} candidates")]
    LabelOutOfRange { index: usize, len: usize },
    #[error("negative sampling needs at least 2 entities, found {0}")]
    TooFewEntities(usize),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
