//! Normalizing flow over dequantized token-index vectors: ActNorm, masked affine coupling
//! and linear layers on a diagonal standard normal base.
//!
//! Layers map latent to data with `forward` and data to latent with `inverse`; the model
//! lists layers from the data side, so densities run through them in order and sampling
//! runs through them in reverse.

mod layers;
mod model;
mod train;

use thiserror::Error;

pub use layers::{ActNorm, FlowLayer, LinearFlow, MaskedAffine, MIN_ABS_DET, VARIANCE_FLOOR};
pub use model::{
    dequantize, generate_molecules, quantize, standard_normal_log_density, FlowConfig, FlowModel, LayerKind,
};
pub use train::{encode_molecules, train_flow, EncodedSet, FlowData, FlowNanDiagnostics, FlowTrainer};

use crate::diff::DiffError;
use crate::selfies::SelfiesError;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear flow weight is singular (det = {0:e})")]
    Singular(f64),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss in epoch {} batch {}: {}", .0.epoch, .0.batch, serde_json::to_string(.0).unwrap_or_default())]
    NaNLoss(Box<FlowNanDiagnostics>),
    #[error(transparent)]
    Diff(DiffError),
    #[error(transparent)]
    Selfies(#[from] SelfiesError),
}

impl From<DiffError> for FlowError {
    fn from(e: DiffError) -> Self {
        match e {
            DiffError::Singular(d) => FlowError::Singular(d),
            other => FlowError::Diff(other),
        }
    }
}
