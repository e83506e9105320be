use std::path::{Path, PathBuf};

use molgen::molgan::{EarlyStopping, MolganConfig};
use molgen::nflow::FlowConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Molgan,
    Nflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// SMILES column of a CSV file; unset for one SMILES per line.
    #[serde(default)]
    pub column: Option<String>,
    /// Random subset size drawn after filtering.
    #[serde(default)]
    pub subsample: Option<usize>,
}

/// Everything a `train` run needs. Relative dataset paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub molgan: MolganConfig,
    #[serde(default)]
    pub nflow: FlowConfig,
    /// Passes over the data; unset means 300 for molgan and `nflow.epochs` for nflow.
    #[serde(default)]
    pub epochs: Option<u64>,
    /// Cap on discriminator steps (molgan only).
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Steps (molgan) or epochs (nflow) between intermediate checkpoints.
    #[serde(default)]
    pub checkpoint_interval: Option<u64>,
    #[serde(default)]
    pub early_stopping: Option<EarlyStopping>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

pub const MOLGAN_DEFAULT_EPOCHS: u64 = 300;

impl RunConfig {
    pub fn epochs(&self) -> u64 {
        match (self.epochs, self.model) {
            (Some(e), _) => e,
            (None, ModelChoice::Molgan) => MOLGAN_DEFAULT_EPOCHS,
            (None, ModelChoice::Nflow) => self.nflow.epochs,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.model {
            ModelChoice::Molgan => self.molgan.validate().map_err(|e| e.to_string())?,
            ModelChoice::Nflow => self.nflow.validate().map_err(|e| e.to_string())?,
        }
        if self.epochs == Some(0) {
            return Err("epochs must be at least 1".into());
        }
        if self.dataset.subsample == Some(0) {
            return Err("dataset.subsample must be at least 1".into());
        }
        if self.checkpoint_interval == Some(0) {
            return Err("checkpoint_interval must be at least 1".into());
        }
        if let Some(es) = &self.early_stopping {
            if es.interval == 0 || es.sample_count == 0 {
                return Err("early_stopping.interval and sample_count must be at least 1".into());
            }
        }
        Ok(())
    }
}

/// Parse and validate a config document. Errors name the offending field and position.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        format!(
            "{}: field `{}` (line {}, column {}): {}",
            origin.display(),
            e.path(),
            inner.line(),
            inner.column(),
            strip_position(&inner.to_string())
        )
    })?;
    cfg.validate().map_err(|e| format!("{}: {e}", origin.display()))?;
    if cfg.dataset.path.is_relative() {
        if let Some(dir) = origin.parent() {
            cfg.dataset.path = dir.join(&cfg.dataset.path);
        }
    }
    Ok(cfg)
}

fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |i| &msg[..i])
}
