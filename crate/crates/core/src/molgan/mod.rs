//! Graph GAN: an MLP generator emitting node and edge logits, a relational graph
//! convolution critic, Gumbel-softmax relaxations and WGAN-GP training.

mod config;
mod loss;
mod model;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{DiscriminatorConfig, MolganConfig, SamplingMode};
pub use loss::{critic_gradient_norm, generator_loss, interpolate, wgan_gp_loss, GpLoss};
pub use model::{gumbel_noise, sample_categorical, Discriminator, Generator, GraphBatch, RelationalConv};
pub use train::{
    canonical_set, featurize_all, generator_update_due, predict_generator, sample_latent, train, EarlyStopping,
    MolganModel, StepRecord, StopReason, TrainOptions, Trainer,
};

use crate::diff::DiffError;
use crate::graphs::GraphError;

/// State captured when a loss turns non-finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NanDiagnostics {
    pub step: u64,
    pub epoch: u64,
    pub last: StepRecord,
    pub recent: Vec<StepRecord>,
    pub generator_param_norm: f64,
    pub discriminator_param_norm: f64,
}

#[derive(Debug, Error)]
pub enum MolganError {
    #[error("invalid molgan config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("non-finite loss at step {} (epoch {}): {}", .0.step, .0.epoch, serde_json::to_string(.0).unwrap_or_default())]
    NaNLoss(Box<NanDiagnostics>),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("checkpoint callback failed: {0}")]
    Checkpoint(String),
}
