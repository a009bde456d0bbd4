use thiserror::Error;

fn fmt_shape(s: &[usize]) -> String {
    format!("{s:?}")
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {} vs {}", fmt_shape(.left), fmt_shape(.right))]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: {message}")]
    Invalid { op: &'static str, message: String },
    #[error("backward needs a scalar loss, got shape {}", fmt_shape(.0))]
    NotScalar(Vec<usize>),
    #[error("loss does not depend on any trainable leaf")]
    NoTape,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TensorError {
    pub(crate) fn mismatch(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        TensorError::ShapeMismatch {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn invalid(op: &'static str, message: impl Into<String>) -> Self {
        TensorError::Invalid {
            op,
            message: message.into(),
        }
    }
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
