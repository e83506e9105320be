use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{dequantize, FlowConfig, FlowModel};
use super::FlowError;
use crate::chem::Molecule;
use crate::diff::{backward, Adam, Tensor};
use crate::nn::Parameters;
use crate::rng::{stream, streams, substream, RunRng};
use crate::selfies::{encode, TokenSequence};

/// Training rows: token indices (dequantized afresh every epoch) or real vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowData {
    Indices(Vec<Vec<usize>>),
    Continuous(Vec<Vec<f64>>),
}

impl FlowData {
    pub fn len(&self) -> usize {
        match self {
            FlowData::Indices(v) => v.len(),
            FlowData::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            FlowData::Indices(v) => v.first().map(Vec::len),
            FlowData::Continuous(v) => v.first().map(Vec::len),
        }
    }

    fn row(&self, i: usize, rng: &mut RunRng) -> Vec<f64> {
        match self {
            FlowData::Indices(v) => dequantize(&v[i], rng),
            FlowData::Continuous(v) => v[i].clone(),
        }
    }
}

/// Token sequences of the encodable molecules, padded to one length.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSet {
    pub sequences: Vec<Vec<usize>>,
    pub fixed_length: usize,
    /// Molecules that could not be encoded or exceeded `fixed_length`.
    pub skipped: usize,
}

pub fn encode_molecules(mols: &[Molecule], fixed_length: Option<usize>) -> EncodedSet {
    let encoded: Vec<_> = mols.iter().filter_map(|m| encode(m).ok()).collect();
    let mut skipped = mols.len() - encoded.len();
    let fixed_length = fixed_length.unwrap_or_else(|| encoded.iter().map(Vec::len).max().unwrap_or(1));
    let sequences: Vec<Vec<usize>> = encoded
        .into_iter()
        .filter_map(|t| TokenSequence::padded(t, fixed_length).ok().map(|s| s.to_indices()))
        .collect();
    skipped += mols.len() - skipped - sequences.len();
    EncodedSet { sequences, fixed_length, skipped }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNanDiagnostics {
    pub epoch: u64,
    pub batch: usize,
    pub loss: f64,
    pub history: Vec<f64>,
    pub param_norm: f64,
}

/// Flow with its optimizer, epoch counter and dequantization stream.
#[derive(Debug, Clone)]
pub struct FlowTrainer {
    pub model: FlowModel,
    pub optimizer: Adam,
    pub batch_size: usize,
    pub seed: u64,
    pub epoch: u64,
    pub noise_rng: RunRng,
    /// Mean negative log-likelihood per epoch.
    pub history: Vec<f64>,
}

impl FlowTrainer {
    pub fn new(model: FlowModel, config: &FlowConfig, seed: u64) -> Result<FlowTrainer, FlowError> {
        config.validate()?;
        let optimizer = Adam::new(config.optimizer, &model.params());
        Ok(FlowTrainer {
            model,
            optimizer,
            batch_size: config.batch_size,
            seed,
            epoch: 0,
            noise_rng: stream(seed, streams::TRAIN_NOISE),
            history: Vec::new(),
        })
    }

    /// Run epochs until `self.epoch == epochs`.
    pub fn fit(&mut self, data: &FlowData, epochs: u64) -> Result<(), FlowError> {
        if data.is_empty() {
            return Err(FlowError::EmptyDataset);
        }
        let dim = self.model.dim;
        if data.dim() != Some(dim) {
            return Err(FlowError::DimensionMismatch { expected: dim, got: data.dim().unwrap_or(0) });
        }
        while self.epoch < epochs {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut substream(self.seed, streams::DATA_ORDER, self.epoch));
            let mut total = 0.0;
            for (bi, chunk) in order.chunks(self.batch_size).enumerate() {
                let rows: Vec<f64> = chunk.iter().flat_map(|&i| data.row(i, &mut self.noise_rng)).collect();
                let x = Tensor::new(&[chunk.len(), dim], rows)?;
                self.model.actnorm_init(&x)?;
                let loss = self.model.log_prob_batch(&x)?.mean_all().neg();
                let value = loss.item();
                if !value.is_finite() {
                    return Err(self.nan_error(bi, value));
                }
                total += value * chunk.len() as f64;
                let grads = backward(&loss)?;
                let g: Vec<Tensor> = self.model.params().iter().map(|p| grads.get_or_zeros(p)).collect();
                drop(grads);
                self.optimizer.step(&mut self.model.params_mut(), &g)?;
                self.model.check_invertible()?;
            }
            let mean = total / data.len() as f64;
            log::info!("flow epoch {}: nll {mean:.4}", self.epoch);
            self.history.push(mean);
            self.epoch += 1;
        }
        Ok(())
    }

    fn nan_error(&self, batch: usize, loss: f64) -> FlowError {
        let param_norm = self.model.params().iter().flat_map(|t| t.data().to_vec()).map(|v| v * v).sum::<f64>().sqrt();
        FlowError::NaNLoss(Box::new(FlowNanDiagnostics {
            epoch: self.epoch,
            batch,
            loss,
            history: self.history.clone(),
            param_norm,
        }))
    }
}

/// Build a model from `config`, train it for `config.epochs` and return it with the
/// per-epoch NLL history.
pub fn train_flow(config: &FlowConfig, data: &FlowData, seed: u64) -> Result<(FlowModel, Vec<f64>), FlowError> {
    let dim = data.dim().ok_or(FlowError::EmptyDataset)?;
    let model = FlowModel::from_config(config, dim, &mut stream(seed, streams::INIT))?;
    let mut trainer = FlowTrainer::new(model, config, seed)?;
    trainer.fit(data, config.epochs)?;
    Ok((trainer.model, trainer.history))
}
