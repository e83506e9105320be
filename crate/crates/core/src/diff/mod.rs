//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Every backward rule is itself written with differentiable tensor ops, so gradients
//! taken with `create_graph = true` can be differentiated again. Ops whose backward
//! uses non-differentiable state (dropout masks, matrix inverses) refuse that mode with
//! [`DiffError::SecondOrderUnsupportedOp`].
//!
//! Broadcasting follows the usual right-aligned rule: trailing dimensions must match or
//! be 1, missing leading dimensions are treated as 1.

mod backward;
mod optim;
mod tensor;

pub use backward::{backward, grad, Gradients};
pub use optim::{Adam, AdamConfig, AdamState, ExponentialDecaySchedule, LearningRate};
pub use tensor::{is_grad_enabled, no_grad, NoGradGuard, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("op `{0}` does not support differentiating its gradient")]
    SecondOrderUnsupportedOp(&'static str),
    #[error("matrix is singular (|det| = {0:e})")]
    Singular(f64),
}

pub type Result<T> = std::result::Result<T, DiffError>;
