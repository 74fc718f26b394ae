//! Dense matrices, a reverse-mode tape, the GRU cell and the Adam optimizer.

mod adam;
mod gru;
mod mat;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use gru::{gru_cell, GruVars};
pub use mat::Mat;
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange { op: &'static str, index: usize, bound: usize },
    #[error("{op}: degenerate input: {detail}")]
    Degenerate { op: &'static str, detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
