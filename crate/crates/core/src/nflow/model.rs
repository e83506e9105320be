use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{ActNorm, FlowLayer, LinearFlow, MaskedAffine};
use super::FlowError;
use crate::chem::Molecule;
use crate::diff::{no_grad, AdamConfig, LearningRate, Tensor};
use crate::nn::Parameters;
use crate::rng::{standard_normal_vec, RunRng};
use crate::selfies::{decode, indices_to_tokens, vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    ActNorm,
    MaskedAffine,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Layers listed from the data side to the latent side.
    pub layers: Vec<LayerKind>,
    /// Hidden width of the scale and shift networks; `None` means twice the dimension.
    pub hidden_width: Option<usize>,
    /// Padded token length; `None` takes the longest training sequence.
    pub fixed_length: Option<usize>,
    pub batch_size: usize,
    pub epochs: u64,
    pub optimizer: AdamConfig,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            layers: vec![LayerKind::ActNorm, LayerKind::MaskedAffine, LayerKind::MaskedAffine],
            hidden_width: None,
            fixed_length: None,
            batch_size: 1024,
            epochs: 100,
            optimizer: AdamConfig {
                learning_rate: LearningRate::Fixed(1e-4),
                weight_decay: 1e-4,
                ..AdamConfig::default()
            },
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.hidden_width == Some(0) {
            return bad("hidden_width must be at least 1");
        }
        if self.fixed_length == Some(0) {
            return bad("fixed_length must be at least 1");
        }
        self.optimizer.learning_rate.validate().map_err(|e| FlowError::InvalidConfig(e.to_string()))
    }
}

/// Stack of invertible layers over a standard normal base of dimension `dim`.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub dim: usize,
    pub layers: Vec<FlowLayer>,
}

pub fn standard_normal_log_density(z: &[f64]) -> f64 {
    -0.5 * z.iter().map(|v| v * v).sum::<f64>() - 0.5 * z.len() as f64 * (2.0 * PI).ln()
}

impl FlowModel {
    pub fn new(dim: usize, layers: Vec<FlowLayer>) -> FlowModel {
        FlowModel { dim, layers }
    }

    /// Layers per `config`; masked affine layers alternate even and odd masks.
    pub fn from_config(config: &FlowConfig, dim: usize, rng: &mut RunRng) -> Result<FlowModel, FlowError> {
        config.validate()?;
        if dim == 0 {
            return Err(FlowError::InvalidConfig("flow dimension must be at least 1".into()));
        }
        let hidden = config.hidden_width.unwrap_or(2 * dim);
        let mut parity = 0;
        let layers = config
            .layers
            .iter()
            .map(|kind| match kind {
                LayerKind::ActNorm => FlowLayer::ActNorm(ActNorm::new(dim)),
                LayerKind::MaskedAffine => {
                    let l = MaskedAffine::new(dim, hidden, parity, rng);
                    parity ^= 1;
                    FlowLayer::MaskedAffine(l)
                }
                LayerKind::Linear => FlowLayer::Linear(LinearFlow::identity(dim)),
            })
            .collect();
        Ok(FlowModel { dim, layers })
    }

    fn check_input(&self, x: &Tensor) -> Result<(), FlowError> {
        if x.ndim() != 2 || x.shape()[1] != self.dim {
            return Err(FlowError::DimensionMismatch {
                expected: self.dim,
                got: x.shape().last().copied().unwrap_or(0),
            });
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(FlowError::NonFiniteInput);
        }
        Ok(())
    }

    /// Data to latent through every layer, with the summed inverse log-determinant.
    pub fn to_latent(&self, x: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let mut h = x.clone();
        let mut total = Tensor::zeros(&[x.shape()[0]]);
        for layer in &self.layers {
            let (next, ld) = layer.inverse(&h)?;
            h = next;
            total = total.add(&ld)?;
        }
        Ok((h, total))
    }

    /// Latent to data through every layer, with the summed forward log-determinant.
    pub fn to_data(&self, z: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let mut h = z.clone();
        let mut total = Tensor::zeros(&[z.shape()[0]]);
        for layer in self.layers.iter().rev() {
            let (next, ld) = layer.forward(&h)?;
            h = next;
            total = total.add(&ld)?;
        }
        Ok((h, total))
    }

    /// Per-row log density of a `B × dim` batch.
    pub fn log_prob_batch(&self, x: &Tensor) -> Result<Tensor, FlowError> {
        self.check_input(x)?;
        let (z, logdet) = self.to_latent(x)?;
        let base = z.square().sum_axis(1)?.mul_scalar(-0.5).add_scalar(-0.5 * self.dim as f64 * (2.0 * PI).ln());
        Ok(base.add(&logdet)?)
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<f64, FlowError> {
        let _guard = no_grad();
        let t = Tensor::new(&[1, x.len()], x.to_vec())?;
        Ok(self.log_prob_batch(&t)?.item())
    }

    /// `count × dim` samples, one row per sample.
    pub fn sample(&self, count: usize, rng: &mut RunRng) -> Result<Vec<Vec<f64>>, FlowError> {
        let _guard = no_grad();
        let z = Tensor::new(&[count, self.dim], standard_normal_vec(rng, count * self.dim))?;
        let (x, _) = self.to_data(&z)?;
        Ok(x.data().chunks(self.dim.max(1)).map(|r| r.to_vec()).take(count).collect())
    }

    /// Data-dependent init of every uninitialized ActNorm layer from `batch`, seen through
    /// the layers before it. Returns the number of layers initialized.
    pub fn actnorm_init(&mut self, batch: &Tensor) -> Result<usize, FlowError> {
        self.check_input(batch)?;
        let _guard = no_grad();
        let mut h = batch.clone();
        let mut count = 0;
        for layer in &mut self.layers {
            if let FlowLayer::ActNorm(a) = layer {
                if a.initialize(&h) {
                    count += 1;
                }
            }
            h = layer.inverse(&h)?.0;
        }
        Ok(count)
    }

    pub fn check_invertible(&self) -> Result<(), FlowError> {
        for layer in &self.layers {
            if let FlowLayer::Linear(l) = layer {
                l.check()?;
            }
        }
        Ok(())
    }
}

impl Parameters for FlowModel {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.layers.iter().enumerate().flat_map(|(k, l)| l.named_params(&format!("flow.{k}"))).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

/// `index + u` with `u ~ U[0, 1)` per entry.
pub fn dequantize(indices: &[usize], rng: &mut RunRng) -> Vec<f64> {
    indices.iter().map(|&i| i as f64 + rng.random::<f64>()).collect()
}

/// Floor each entry and clamp into `0..vocab_size`.
pub fn quantize(v: &[f64], vocab_size: usize) -> Vec<usize> {
    let top = vocab_size.saturating_sub(1) as f64;
    v.iter()
        .map(|&x| {
            let f = if x.is_nan() { 0.0 } else { x.floor() };
            f.clamp(0.0, top) as usize
        })
        .collect()
}

/// Sample, quantize to token indices and decode.
pub fn generate_molecules(model: &FlowModel, count: usize, rng: &mut RunRng) -> Result<Vec<Molecule>, FlowError> {
    let v = vocabulary().len();
    model.sample(count, rng)?.iter().map(|row| Ok(decode(&indices_to_tokens(&quantize(row, v))?))).collect()
}
