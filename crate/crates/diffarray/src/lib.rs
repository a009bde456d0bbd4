//! Dense `f32` arrays with tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records primitives applied to [`Var`] handles; calling
//! [`Tape::backward`] on a scalar yields [`Gradients`], which feed a
//! [`ParamStore`] and its Adam optimizer.

mod backward;
mod checkpoint;
mod error;
mod param;
mod sparse;
mod tape;
mod tensor;

pub use backward::Gradients;
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION,
};
pub use error::{Result, TensorError};
pub use param::{adam_update, AdamConfig, ParamId, ParamStore};
pub use sparse::SparseMatrix;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
