use opspace_diffarray::TensorError;
use opspace_symbolic::{OpError, ParseError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no premise with {wanted} variables after {attempts} attempts")]
    RetryExhausted { wanted: usize, attempts: usize },
    #[error("malformed dataset: {0}")]
    Dataset(String),
    #[error("encoder input is empty")]
    EmptyInput,
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("batch of {0} is too small for in-batch negatives")]
    BatchTooSmall(usize),
    #[error("representational collapse at epoch {epoch}: {detail}")]
    CollapseDetected { epoch: usize, detail: String },
    #[error("ranked list has no relevant candidate")]
    NoRelevant,
    #[error("cannot score a zero vector")]
    ZeroVector,
    #[error("all points coincide; covariance is degenerate")]
    DegenerateCovariance,
    #[error("multi-step candidates missing at chain {chain}, step {step}")]
    MissingCandidates { chain: usize, step: usize },
    #[error("output directory {0} is not empty (pass --force to write into it)")]
    OutputNotEmpty(std::path::PathBuf),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
