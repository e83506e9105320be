use serde::{Deserialize, Serialize};

use super::MolganError;
use crate::diff::AdamConfig;
use crate::graphs::GraphSpec;

/// How continuous generator logits are turned into graph tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Logits plus Gumbel(0, 1) noise, softmax at temperature τ.
    Gumbel,
    /// One-hot of the Gumbel sample forward, Gumbel-softmax gradient backward.
    StraightThrough,
    /// Plain softmax of the logits.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub conv_widths: Vec<usize>,
    pub aggregation_width: usize,
    /// Hidden widths of the scoring MLP after aggregation; a final layer maps to one score.
    pub dense_widths: Vec<usize>,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { conv_widths: vec![64, 32], aggregation_width: 128, dense_widths: vec![64] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MolganConfig {
    pub spec: GraphSpec,
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator: DiscriminatorConfig,
    pub penalty_coefficient: f64,
    pub sampling_mode: SamplingMode,
    pub temperature: f64,
    pub generator_steps_ratio: f64,
    pub batch_size: usize,
    pub dropout: f64,
    /// Keep dropout active in the gradient-penalty pass. Dropout has no second derivative
    /// in the autodiff engine, so enabling this together with `dropout > 0` fails at the
    /// first discriminator step.
    pub penalty_dropout: bool,
    pub generator_optimizer: AdamConfig,
    pub discriminator_optimizer: AdamConfig,
}

impl Default for MolganConfig {
    fn default() -> Self {
        MolganConfig {
            spec: GraphSpec::default(),
            latent_dim: 32,
            generator_hidden: vec![128, 256, 512],
            discriminator: DiscriminatorConfig::default(),
            penalty_coefficient: 10.0,
            sampling_mode: SamplingMode::Gumbel,
            temperature: 1.0,
            generator_steps_ratio: 0.2,
            batch_size: 32,
            dropout: 0.0,
            penalty_dropout: false,
            generator_optimizer: AdamConfig::default(),
            discriminator_optimizer: AdamConfig::default(),
        }
    }
}

impl MolganConfig {
    pub fn validate(&self) -> Result<(), MolganError> {
        let bad = |msg: String| Err(MolganError::InvalidConfig(msg));
        self.spec.validate()?;
        let d = &self.discriminator;
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1".into());
        }
        if self.generator_hidden.iter().chain(&d.conv_widths).chain(&d.dense_widths).any(|&w| w == 0)
            || d.aggregation_width == 0
        {
            return bad("layer widths must be at least 1".into());
        }
        if d.conv_widths.is_empty() {
            return bad("discriminator needs at least one convolution layer".into());
        }
        if !(self.penalty_coefficient >= 0.0 && self.penalty_coefficient.is_finite()) {
            return bad(format!("penalty_coefficient {} must be finite and >= 0", self.penalty_coefficient));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be > 0", self.temperature));
        }
        if !(self.generator_steps_ratio > 0.0 && self.generator_steps_ratio <= 1.0) {
            return bad(format!("generator_steps_ratio {} must be in (0, 1]", self.generator_steps_ratio));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} must be in [0, 1)", self.dropout));
        }
        for opt in [&self.generator_optimizer, &self.discriminator_optimizer] {
            opt.learning_rate.validate().map_err(|e| MolganError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = MolganConfig::default();
        c.validate().unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<MolganConfig>(&json).unwrap(), c);
        let partial: MolganConfig = serde_json::from_str(r#"{"sampling_mode": "straight_through"}"#).unwrap();
        assert_eq!(partial.sampling_mode, SamplingMode::StraightThrough);
        assert_eq!(partial.latent_dim, 32);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(serde_json::from_str::<MolganConfig>(r#"{"sampling_mode": "argmax"}"#).is_err());
        assert!(serde_json::from_str::<MolganConfig>(r#"{"latent": 3}"#).is_err());
        for c in [
            MolganConfig { generator_steps_ratio: 0.0, ..Default::default() },
            MolganConfig { generator_steps_ratio: 1.5, ..Default::default() },
            MolganConfig { penalty_coefficient: -1.0, ..Default::default() },
            MolganConfig { temperature: 0.0, ..Default::default() },
            MolganConfig { generator_hidden: vec![128, 0], ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
