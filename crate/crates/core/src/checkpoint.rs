//! JSON checkpoints holding every parameter tensor, optimizer moments, the model config,
//! the run seed and the RNG state, enough to resume training exactly.
//!
//! Layout (`format = "molgen-checkpoint"`, `version = 1`): `model` (`"molgan"` or
//! `"nflow"`), `config`, `config_digest` (SHA-256 hex of the config's compact JSON with
//! sorted keys), `seed`, `step` (discriminator steps or flow epochs), `rng`, `tensors`
//! (`name`, `shape`, row-major `data`), `optimizers` and a model-specific `extra` object.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diff::{Adam, Tensor};
use crate::molgan::{MolganConfig, MolganError, MolganModel, StepRecord, Trainer};
use crate::nflow::{FlowConfig, FlowError, FlowLayer, FlowModel, FlowTrainer};
use crate::nn::Parameters;
use crate::rng::{stream, streams, RunRng};

pub const FORMAT: &str = "molgen-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint: {0}")]
    Format(String),
    #[error("checkpoint holds a {found} model, expected {expected}")]
    ModelMismatch { expected: ModelKind, found: ModelKind },
    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),
    #[error("tensor {name} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("config digest mismatch: recorded {recorded}, computed {computed}")]
    DigestMismatch { recorded: String, computed: String },
    #[error(transparent)]
    Molgan(#[from] MolganError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Molgan,
    Nflow,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Molgan => "molgan",
            ModelKind::Nflow => "nflow",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedOptimizer {
    pub name: String,
    pub adam: Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelKind,
    pub config: serde_json::Value,
    pub config_digest: String,
    pub seed: u64,
    pub step: u64,
    pub rng: RunRng,
    pub tensors: Vec<TensorRecord>,
    pub optimizers: Vec<NamedOptimizer>,
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MolganExtra {
    history: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FlowExtra {
    dim: usize,
    actnorm_initialized: Vec<bool>,
    history: Vec<f64>,
}

/// SHA-256 hex digest of the compact JSON form of `config`, object keys sorted.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).expect("configs serialize");
    let bytes = serde_json::to_vec(&value).expect("values serialize");
    hex::encode(Sha256::digest(bytes))
}

fn records(named: Vec<(String, &Tensor)>) -> Vec<TensorRecord> {
    named
        .into_iter()
        .map(|(name, t)| TensorRecord { name, shape: t.shape().to_vec(), data: t.data().to_vec() })
        .collect()
}

fn restore_params<P: Parameters>(target: &mut P, tensors: &[TensorRecord]) -> Result<(), CheckpointError> {
    let names: Vec<(String, Vec<usize>)> =
        target.named_params().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
    let mut values = Vec::with_capacity(names.len());
    for (name, shape) in &names {
        let rec =
            tensors.iter().find(|r| &r.name == name).ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
        if &rec.shape != shape || rec.data.len() != shape.iter().product::<usize>() {
            return Err(CheckpointError::ShapeMismatch {
                name: name.clone(),
                expected: shape.clone(),
                found: rec.shape.clone(),
            });
        }
        values.push(rec.data.clone());
    }
    for (p, v) in target.params_mut().into_iter().zip(values) {
        *p = Tensor::param(p.shape(), v).expect("shape checked");
    }
    Ok(())
}

fn optimizer(ckpt: &Checkpoint, name: &str) -> Result<Adam, CheckpointError> {
    ckpt.optimizers
        .iter()
        .find(|o| o.name == name)
        .map(|o| o.adam.clone())
        .ok_or_else(|| CheckpointError::Format(format!("missing optimizer {name}")))
}

impl Checkpoint {
    pub fn from_molgan(trainer: &Trainer) -> Checkpoint {
        let config = &trainer.model.config;
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            model: ModelKind::Molgan,
            config: serde_json::to_value(config).expect("config serializes"),
            config_digest: config_digest(config),
            seed: trainer.seed,
            step: trainer.step,
            rng: trainer.noise_rng.clone(),
            tensors: records(trainer.model.named_params()),
            optimizers: vec![
                NamedOptimizer { name: "generator".into(), adam: trainer.generator_optimizer.clone() },
                NamedOptimizer { name: "discriminator".into(), adam: trainer.discriminator_optimizer.clone() },
            ],
            extra: serde_json::to_value(MolganExtra { history: trainer.history.clone() }).expect("history serializes"),
        }
    }

    pub fn to_molgan(&self) -> Result<Trainer, CheckpointError> {
        self.expect_model(ModelKind::Molgan)?;
        let config: MolganConfig = serde_json::from_value(self.config.clone())?;
        let mut model = MolganModel::new(config, self.seed)?;
        restore_params(&mut model.generator, &self.tensors)?;
        restore_params(&mut model.discriminator, &self.tensors)?;
        let extra: MolganExtra = serde_json::from_value(self.extra.clone())?;
        Ok(Trainer {
            model,
            generator_optimizer: optimizer(self, "generator")?,
            discriminator_optimizer: optimizer(self, "discriminator")?,
            seed: self.seed,
            step: self.step,
            noise_rng: self.rng.clone(),
            history: extra.history,
        })
    }

    pub fn from_flow(trainer: &FlowTrainer, config: &FlowConfig) -> Checkpoint {
        let actnorm_initialized = trainer
            .model
            .layers
            .iter()
            .filter_map(|l| match l {
                FlowLayer::ActNorm(a) => Some(a.initialized),
                _ => None,
            })
            .collect();
        let extra = FlowExtra { dim: trainer.model.dim, actnorm_initialized, history: trainer.history.clone() };
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            model: ModelKind::Nflow,
            config: serde_json::to_value(config).expect("config serializes"),
            config_digest: config_digest(config),
            seed: trainer.seed,
            step: trainer.epoch,
            rng: trainer.noise_rng.clone(),
            tensors: records(trainer.model.named_params()),
            optimizers: vec![NamedOptimizer { name: "flow".into(), adam: trainer.optimizer.clone() }],
            extra: serde_json::to_value(extra).expect("extra serializes"),
        }
    }

    pub fn to_flow(&self) -> Result<(FlowTrainer, FlowConfig), CheckpointError> {
        self.expect_model(ModelKind::Nflow)?;
        let config: FlowConfig = serde_json::from_value(self.config.clone())?;
        let extra: FlowExtra = serde_json::from_value(self.extra.clone())?;
        let mut model = FlowModel::from_config(&config, extra.dim, &mut stream(self.seed, streams::INIT))?;
        restore_params(&mut model, &self.tensors)?;
        let mut flags = extra.actnorm_initialized.iter();
        for layer in &mut model.layers {
            if let FlowLayer::ActNorm(a) = layer {
                a.initialized = *flags.next().ok_or_else(|| CheckpointError::Format("missing ActNorm flag".into()))?;
            }
        }
        model.check_invertible()?;
        let mut trainer = FlowTrainer::new(model, &config, self.seed)?;
        trainer.optimizer = optimizer(self, "flow")?;
        trainer.epoch = self.step;
        trainer.noise_rng = self.rng.clone();
        trainer.history = extra.history;
        Ok((trainer, config))
    }

    fn expect_model(&self, expected: ModelKind) -> Result<(), CheckpointError> {
        if self.model != expected {
            return Err(CheckpointError::ModelMismatch { expected, found: self.model });
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CheckpointError> {
        if self.format != FORMAT {
            return Err(CheckpointError::Format(format!("format {:?}", self.format)));
        }
        if self.version != VERSION {
            return Err(CheckpointError::Format(format!("unsupported version {}", self.version)));
        }
        let computed = config_digest(&self.config);
        if computed != self.config_digest {
            return Err(CheckpointError::DigestMismatch { recorded: self.config_digest.clone(), computed });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Checkpoint, CheckpointError> {
        let c: Checkpoint = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)
    }
}
