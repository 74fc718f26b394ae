//! The session encoder, its ablation variants, and the activation trace.

mod forward;
mod params;
mod trace;
mod variant;

pub use forward::{run_forward, ForwardOptions, SessionForward};
pub use params::{Block, ModelDims, ModelParams, DEFAULT_SCALE};
pub use trace::{parse_trace, ForwardActivations, LayerActivations};
pub use variant::{AblationConfig, Variant};

pub(crate) use variant::{Encoder, Fusion};

use crate::autodiff::TensorError;
use crate::data::MacroView;
use crate::graph::GraphError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("session needs {slots} attention slots but only {max} positions exist; truncate sessions upstream")]
    SessionTooLong { slots: usize, max: usize },
    #[error("invalid session view: {0}")]
    InvalidView(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
}

/// Evaluation-mode forward pass returning the next-item distribution and
/// every named intermediate.
pub fn forward(
    params: &ModelParams,
    view: &MacroView,
    ablation: &AblationConfig,
) -> Result<(Vec<f64>, ForwardActivations), ModelError> {
    let run = run_forward(params, view, ablation, ForwardOptions::eval(params))?;
    let acts = ForwardActivations::collect(&run);
    Ok((run.probabilities().to_vec(), acts))
}

/// Evaluation-mode scores (cosine logits) for ranking.
pub fn score(params: &ModelParams, view: &MacroView, ablation: &AblationConfig) -> Result<Vec<f64>, ModelError> {
    let run = run_forward(params, view, ablation, ForwardOptions::eval(params))?;
    Ok(run.logits().to_vec())
}
