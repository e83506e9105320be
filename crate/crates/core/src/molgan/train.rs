use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::MolganConfig;
use super::loss::{generator_loss, wgan_gp_loss};
use super::model::{Discriminator, Generator, GraphBatch};
use super::{MolganError, NanDiagnostics};
use crate::chem::Molecule;
use crate::diff::{backward, no_grad, Adam, Tensor};
use crate::graphs::{defeaturize, featurize, one_hot_argmax, GraphTensors};
use crate::metrics::{canonical_key, is_valid};
use crate::nn::Parameters;
use crate::rng::{standard_normal_vec, stream, streams, substream, RunRng};

/// Generator and discriminator with the configuration that shaped them.
#[derive(Debug, Clone)]
pub struct MolganModel {
    pub config: MolganConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
}

impl MolganModel {
    pub fn new(config: MolganConfig, seed: u64) -> Result<MolganModel, MolganError> {
        config.validate()?;
        let mut rng = stream(seed, streams::INIT);
        let generator = Generator::new(&config, &mut rng);
        let discriminator = Discriminator::new(&config, &mut rng);
        Ok(MolganModel { config, generator, discriminator })
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.generator.named_params();
        out.extend(self.discriminator.named_params());
        out
    }
}

/// `batch × latent_dim` standard normal draws.
pub fn sample_latent(rng: &mut RunRng, batch: usize, latent_dim: usize) -> Tensor {
    Tensor::new(&[batch, latent_dim], standard_normal_vec(rng, batch * latent_dim)).expect("latent shape")
}

/// Sample `count` graphs from the generator in evaluation mode and discretize them.
pub fn predict_generator(model: &MolganModel, count: usize, rng: &mut RunRng) -> Result<Vec<Molecule>, MolganError> {
    const CHUNK: usize = 256;
    let c = &model.config;
    let _guard = no_grad();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let b = CHUNK.min(count - out.len());
        let z = sample_latent(rng, b, c.latent_dim);
        let batch = model.generator.generate(&z, c.sampling_mode, c.temperature, false, rng)?;
        for k in 0..b {
            let g = batch.graph(k);
            out.push(defeaturize(&one_hot_argmax(&g.x, &g.a, &c.spec)?, &c.spec));
        }
    }
    Ok(out)
}

/// Whether a generator update follows discriminator step `step` (0-based).
pub fn generator_update_due(step: u64, ratio: f64) -> bool {
    let before = (step as f64 * ratio + 1e-9).floor();
    let after = ((step + 1) as f64 * ratio + 1e-9).floor();
    after > before
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: u64,
    pub d_loss: f64,
    pub wasserstein: f64,
    pub penalty: f64,
    /// Present on steps followed by a generator update.
    pub g_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStopping {
    /// Stop when the uniqueness percentage of a generated sample drops below this.
    pub min_uniqueness: f64,
    pub interval: u64,
    pub sample_count: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping { min_uniqueness: 2.0, interval: 1000, sample_count: 1000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOptions {
    pub epochs: u64,
    /// Hard cap on discriminator steps, taking precedence over `epochs`.
    pub max_steps: Option<u64>,
    pub early_stopping: Option<EarlyStopping>,
    pub checkpoint_interval: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    EarlyStopped { step: u64, uniqueness: f64 },
}

/// Full training state: models, optimizers, step counter and noise stream.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: MolganModel,
    pub generator_optimizer: Adam,
    pub discriminator_optimizer: Adam,
    pub seed: u64,
    /// Discriminator steps taken so far.
    pub step: u64,
    pub noise_rng: RunRng,
    pub history: Vec<StepRecord>,
}

impl Trainer {
    pub fn new(config: MolganConfig, seed: u64) -> Result<Trainer, MolganError> {
        let model = MolganModel::new(config, seed)?;
        let c = &model.config;
        let generator_optimizer = Adam::new(c.generator_optimizer, &model.generator.params());
        let discriminator_optimizer = Adam::new(c.discriminator_optimizer, &model.discriminator.params());
        Ok(Trainer {
            model,
            generator_optimizer,
            discriminator_optimizer,
            seed,
            step: 0,
            noise_rng: stream(seed, streams::TRAIN_NOISE),
            history: Vec::new(),
        })
    }

    /// One discriminator update on `real`, plus a generator update when the schedule says so.
    pub fn train_step(&mut self, real: &GraphBatch, epoch: u64) -> Result<StepRecord, MolganError> {
        let c = self.model.config.clone();
        let b = real.batch_size();
        let rng = &mut self.noise_rng;

        let fake = {
            let _guard = no_grad();
            let z = sample_latent(rng, b, c.latent_dim);
            self.model.generator.generate(&z, c.sampling_mode, c.temperature, true, rng)?
        };
        let eps: Vec<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
        let loss = wgan_gp_loss(
            &self.model.discriminator,
            real,
            &fake,
            c.penalty_coefficient,
            &eps,
            true,
            c.penalty_dropout,
            rng,
        )?;
        let d_loss = loss.d_loss.item();
        let mut record = StepRecord {
            step: self.step,
            epoch,
            d_loss,
            wasserstein: loss.wasserstein,
            penalty: loss.penalty,
            g_loss: None,
        };
        if !d_loss.is_finite() {
            return Err(self.nan_error(record));
        }
        let grads = backward(&loss.d_loss)?;
        drop(loss);
        let d_grads: Vec<Tensor> = self.model.discriminator.params().iter().map(|p| grads.get_or_zeros(p)).collect();
        drop(grads);
        self.discriminator_optimizer.step(&mut self.model.discriminator.params_mut(), &d_grads)?;

        if generator_update_due(self.step, c.generator_steps_ratio) {
            let rng = &mut self.noise_rng;
            let z = sample_latent(rng, b, c.latent_dim);
            let fake = self.model.generator.generate(&z, c.sampling_mode, c.temperature, true, rng)?;
            let g_loss = generator_loss(&self.model.discriminator, &fake, true, rng)?;
            record.g_loss = Some(g_loss.item());
            if !g_loss.item().is_finite() {
                return Err(self.nan_error(record));
            }
            let grads = backward(&g_loss)?;
            let g_grads: Vec<Tensor> = self.model.generator.params().iter().map(|p| grads.get_or_zeros(p)).collect();
            drop(grads);
            self.generator_optimizer.step(&mut self.model.generator.params_mut(), &g_grads)?;
        }
        self.step += 1;
        self.history.push(record.clone());
        Ok(record)
    }

    fn nan_error(&self, last: StepRecord) -> MolganError {
        let norm =
            |ps: Vec<(String, &Tensor)>| ps.iter().flat_map(|(_, t)| t.data()).map(|v| v * v).sum::<f64>().sqrt();
        let start = self.history.len().saturating_sub(10);
        MolganError::NaNLoss(Box::new(NanDiagnostics {
            step: last.step,
            epoch: last.epoch,
            last,
            recent: self.history[start..].to_vec(),
            generator_param_norm: norm(self.model.generator.named_params()),
            discriminator_param_norm: norm(self.model.discriminator.named_params()),
        }))
    }

    /// Train over `data` until the step budget from `options` is spent or early stopping
    /// triggers. Resumes from `self.step`; the data order of each epoch depends only on the
    /// seed and the epoch number. `on_checkpoint` runs every `checkpoint_interval` steps.
    pub fn fit(
        &mut self,
        data: &[GraphTensors],
        options: &TrainOptions,
        on_checkpoint: &mut dyn FnMut(&Trainer) -> Result<(), MolganError>,
    ) -> Result<StopReason, MolganError> {
        if data.is_empty() {
            return Err(MolganError::EmptyDataset);
        }
        let spec = self.model.config.spec.clone();
        let bs = self.model.config.batch_size.min(data.len());
        let per_epoch = data.len().div_ceil(bs) as u64;
        let mut total = options.epochs.saturating_mul(per_epoch);
        if let Some(m) = options.max_steps {
            total = m;
        }
        let mut order: Vec<usize> = Vec::new();
        let mut order_epoch = u64::MAX;
        while self.step < total {
            let epoch = self.step / per_epoch;
            if epoch != order_epoch {
                order = (0..data.len()).collect();
                order.shuffle(&mut substream(self.seed, streams::DATA_ORDER, epoch));
                order_epoch = epoch;
            }
            let k = (self.step % per_epoch) as usize;
            let idx = &order[k * bs..((k + 1) * bs).min(data.len())];
            let graphs: Vec<&GraphTensors> = idx.iter().map(|&i| &data[i]).collect();
            let batch = GraphBatch::from_graphs(&graphs, &spec)?;
            self.train_step(&batch, epoch)?;

            if let Some(interval) = options.checkpoint_interval.filter(|&i| i > 0) {
                if self.step.is_multiple_of(interval) {
                    on_checkpoint(self)?;
                }
            }
            if let Some(es) = options.early_stopping.filter(|e| e.interval > 0) {
                if self.step.is_multiple_of(es.interval) {
                    let mut rng = substream(self.seed, streams::EVAL, self.step);
                    let mols = predict_generator(&self.model, es.sample_count, &mut rng)?;
                    let u = crate::metrics::uniqueness(&mols);
                    log::info!("step {}: uniqueness {u:.2}%", self.step);
                    if u < es.min_uniqueness {
                        return Ok(StopReason::EarlyStopped { step: self.step, uniqueness: u });
                    }
                }
            }
        }
        Ok(StopReason::Completed)
    }
}

/// Featurize `molecules`, skipping those the spec cannot hold.
pub fn featurize_all(molecules: &[Molecule], config: &MolganConfig) -> Vec<GraphTensors> {
    molecules.iter().filter_map(|m| featurize(m, &config.spec).ok()).collect()
}

/// Build a trainer from `seed` and run it over `molecules`.
pub fn train(
    config: MolganConfig,
    molecules: &[Molecule],
    options: &TrainOptions,
    seed: u64,
) -> Result<(Trainer, StopReason), MolganError> {
    let mut trainer = Trainer::new(config, seed)?;
    let data = featurize_all(molecules, &trainer.model.config);
    let reason = trainer.fit(&data, options, &mut |_| Ok(()))?;
    Ok((trainer, reason))
}

/// Canonical strings of the valid molecules in `mols`.
pub fn canonical_set(mols: &[Molecule]) -> HashSet<String> {
    mols.iter().filter(|m| is_valid(m)).map(canonical_key).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use crate::molgan::DiscriminatorConfig;

    fn tiny_config() -> MolganConfig {
        MolganConfig {
            latent_dim: 8,
            generator_hidden: vec![16],
            discriminator: DiscriminatorConfig { conv_widths: vec![8], aggregation_width: 8, dense_widths: vec![8] },
            batch_size: 4,
            ..Default::default()
        }
    }

    fn toy_set() -> Vec<Molecule> {
        ["CCO", "CC=O", "CN", "C#N", "OCCO", "CC(C)C", "FC(F)F", "C1CC1"]
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect()
    }

    #[test]
    fn schedule_gives_twenty_updates_in_hundred_steps() {
        assert_eq!((0..100).filter(|&s| generator_update_due(s, 0.2)).count(), 20);
        assert_eq!((0..100).filter(|&s| generator_update_due(s, 1.0)).count(), 100);
        assert_eq!((0..7).filter(|&s| generator_update_due(s, 1.0 / 3.0)).count(), 2);
    }

    #[test]
    fn trainer_counts_generator_updates() {
        let opts = TrainOptions { epochs: 0, max_steps: Some(10), ..Default::default() };
        let (t, reason) = train(tiny_config(), &toy_set(), &opts, 1).unwrap();
        assert_eq!(reason, StopReason::Completed);
        assert_eq!(t.history.len(), 10);
        assert_eq!(t.history.iter().filter(|r| r.g_loss.is_some()).count(), 2);
        assert_eq!(t.generator_optimizer.step, 2);
        assert_eq!(t.discriminator_optimizer.step, 10);
    }

    #[test]
    fn history_is_deterministic_and_resumable() {
        let opts = TrainOptions { epochs: 2, ..Default::default() };
        let (a, _) = train(tiny_config(), &toy_set(), &opts, 7).unwrap();
        let (b, _) = train(tiny_config(), &toy_set(), &opts, 7).unwrap();
        assert_eq!(a.history, b.history);

        let data = featurize_all(&toy_set(), &tiny_config());
        let mut first = Trainer::new(tiny_config(), 7).unwrap();
        first.fit(&data, &TrainOptions { epochs: 1, ..Default::default() }, &mut |_| Ok(())).unwrap();
        let mut resumed = first.clone();
        resumed.fit(&data, &opts, &mut |_| Ok(())).unwrap();
        assert_eq!(resumed.history, a.history);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let opts = TrainOptions { epochs: 1, ..Default::default() };
        assert!(matches!(train(tiny_config(), &[], &opts, 0), Err(MolganError::EmptyDataset)));
    }

    #[test]
    fn checkpoint_callback_fires_on_interval() {
        let data = featurize_all(&toy_set(), &tiny_config());
        let mut t = Trainer::new(tiny_config(), 3).unwrap();
        let mut seen = Vec::new();
        let opts = TrainOptions { max_steps: Some(7), checkpoint_interval: Some(3), ..Default::default() };
        t.fit(&data, &opts, &mut |tr| {
            seen.push(tr.step);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, [3, 6]);
    }

    #[test]
    fn early_stopping_triggers_on_low_uniqueness() {
        let data = featurize_all(&toy_set(), &tiny_config());
        let mut t = Trainer::new(tiny_config(), 3).unwrap();
        let es = EarlyStopping { min_uniqueness: 101.0, interval: 2, sample_count: 20 };
        let opts = TrainOptions { epochs: 5, early_stopping: Some(es), ..Default::default() };
        let reason = t.fit(&data, &opts, &mut |_| Ok(())).unwrap();
        assert!(matches!(reason, StopReason::EarlyStopped { step: 2, .. }));
    }

    #[test]
    fn nan_parameters_abort_with_diagnostics() {
        let data = featurize_all(&toy_set(), &tiny_config());
        let mut t = Trainer::new(tiny_config(), 3).unwrap();
        let w = &mut t.model.discriminator.dense.layers[0].weight;
        *w = Tensor::param(w.shape(), vec![f64::NAN; w.numel()]).unwrap();
        let err = t.fit(&data, &TrainOptions { epochs: 1, ..Default::default() }, &mut |_| Ok(())).unwrap_err();
        let MolganError::NaNLoss(diag) = err else { panic!("expected NaNLoss, got {err:?}") };
        assert_eq!(diag.step, 0);
        assert!(diag.discriminator_param_norm.is_nan());
    }

    #[test]
    fn predictions_have_requested_count_and_repeat() {
        let model = MolganModel::new(MolganConfig::default(), 11).unwrap();
        let a = predict_generator(&model, 10, &mut stream(5, streams::GENERATE)).unwrap();
        let b = predict_generator(&model, 10, &mut stream(5, streams::GENERATE)).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
    }

    #[test]
    fn latent_moments() {
        let z = sample_latent(&mut stream(0, streams::TRAIN_NOISE), 1000, 32);
        let n = z.numel() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.03);
    }
}
