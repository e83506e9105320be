//! Generative molecular models: a graph GAN with a relational-convolution critic and a
//! normalizing flow over valence-safe token strings, along with the chemistry, tensor
//! autodiff, metrics and dataset plumbing they need.

pub mod checkpoint;
pub mod chem;
pub mod data;
pub mod diff;
pub mod graphs;
pub mod metrics;
pub mod molgan;
pub mod nflow;
pub mod nn;
pub mod rng;
pub mod selfies;
