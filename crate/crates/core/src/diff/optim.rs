use serde::{Deserialize, Serialize};

use super::{DiffError, Result, Tensor};

/// `rate(t) = initial_rate * decay_rate^(t / decay_steps)`, continuous in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialDecaySchedule {
    pub initial_rate: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
}

impl ExponentialDecaySchedule {
    pub fn new(initial_rate: f64, decay_rate: f64, decay_steps: u64) -> Result<Self> {
        let s = ExponentialDecaySchedule { initial_rate, decay_rate, decay_steps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let rate_ok = self.initial_rate.is_finite() && self.initial_rate > 0.0;
        let decay_ok = self.decay_rate > 0.0 && self.decay_rate <= 1.0;
        if !rate_ok || !decay_ok || self.decay_steps == 0 {
            return Err(DiffError::InvalidArgument {
                op: "exponential_decay",
                msg: "need initial_rate > 0, decay_rate in (0, 1], decay_steps > 0".into(),
            });
        }
        Ok(())
    }

    pub fn rate(&self, step: u64) -> f64 {
        self.initial_rate * self.decay_rate.powf(step as f64 / self.decay_steps as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRate {
    Fixed(f64),
    ExponentialDecay(ExponentialDecaySchedule),
}

impl LearningRate {
    pub fn at(&self, step: u64) -> f64 {
        match self {
            LearningRate::Fixed(r) => *r,
            LearningRate::ExponentialDecay(s) => s.rate(step),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearningRate::Fixed(r) if *r > 0.0 && r.is_finite() => Ok(()),
            LearningRate::Fixed(r) => {
                Err(DiffError::InvalidArgument { op: "learning_rate", msg: format!("rate {r} must be positive") })
            }
            LearningRate::ExponentialDecay(s) => s.validate(),
        }
    }
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate::Fixed(1e-4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: LearningRate,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled: `param -= lr * weight_decay * param` before the Adam step.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: LearningRate::default(),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Per-parameter moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub states: Vec<AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let states = params
            .iter()
            .map(|p| AdamState { first_moment: vec![0.0; p.numel()], second_moment: vec![0.0; p.numel()] })
            .collect();
        Adam { config, step: 0, states }
    }

    pub fn current_rate(&self) -> f64 {
        self.config.learning_rate.at(self.step)
    }

    /// One bias-corrected update. Parameters are replaced by fresh gradient-tracking leaves.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != params.len() {
            return Err(DiffError::InvalidArgument {
                op: "adam_step",
                msg: format!("{} params, {} grads, {} states", params.len(), grads.len(), self.states.len()),
            });
        }
        for ((p, g), s) in params.iter().zip(grads).zip(&self.states) {
            if p.shape() != g.shape() || s.first_moment.len() != p.numel() {
                return Err(DiffError::ShapeMismatch {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }
        let lr = self.current_rate();
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for ((p, g), s) in params.iter_mut().zip(grads).zip(&mut self.states) {
            let mut values = p.data().to_vec();
            for (k, v) in values.iter_mut().enumerate() {
                let gk = g.data()[k];
                *v -= lr * c.weight_decay * *v;
                let m = &mut s.first_moment[k];
                let sq = &mut s.second_moment[k];
                *m = c.beta1 * *m + (1.0 - c.beta1) * gk;
                *sq = c.beta2 * *sq + (1.0 - c.beta2) * gk * gk;
                let m_hat = *m / bias1;
                let v_hat = *sq / bias2;
                *v -= lr * m_hat / (v_hat.sqrt() + c.epsilon);
            }
            **p = Tensor::param(p.shape(), values)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_hand_value() {
        let mut p = Tensor::param(&[1], vec![1.0]).unwrap();
        let cfg = AdamConfig { learning_rate: LearningRate::Fixed(0.1), ..AdamConfig::default() };
        let mut opt = Adam::new(cfg, std::slice::from_ref(&p));
        opt.step(&mut [&mut p], &[Tensor::new(&[1], vec![1.0]).unwrap()]).unwrap();
        // m_hat = v_hat = 1
        let expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8));
        assert_eq!(p.data()[0], expected);
        assert!((p.data()[0] - 0.9).abs() < 1e-8);
        assert!(p.requires_grad());
    }

    #[test]
    fn zero_gradient_leaves_param() {
        let mut p = Tensor::param(&[3], vec![0.5, -2.0, 7.0]).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), std::slice::from_ref(&p));
        for _ in 0..3 {
            opt.step(&mut [&mut p], &[Tensor::zeros(&[3])]).unwrap();
        }
        assert_eq!(p.data(), &[0.5, -2.0, 7.0]);
    }

    #[test]
    fn decoupled_weight_decay() {
        let mut p = Tensor::param(&[1], vec![2.0]).unwrap();
        let cfg = AdamConfig { learning_rate: LearningRate::Fixed(0.1), weight_decay: 0.5, ..AdamConfig::default() };
        let mut opt = Adam::new(cfg, std::slice::from_ref(&p));
        opt.step(&mut [&mut p], &[Tensor::zeros(&[1])]).unwrap();
        assert!((p.data()[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Tensor::param(&[2], vec![0.0; 2]).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), std::slice::from_ref(&p));
        assert!(matches!(opt.step(&mut [&mut p], &[Tensor::zeros(&[3])]), Err(DiffError::ShapeMismatch { .. })));
    }

    #[test]
    fn schedule_value() {
        let s = ExponentialDecaySchedule::new(0.001, 0.9, 5000).unwrap();
        assert!((s.rate(5000) - 0.0009).abs() < 1e-15);
        assert_eq!(s.rate(0), 0.001);
        assert!(ExponentialDecaySchedule::new(0.001, 1.5, 10).is_err());
        assert!(ExponentialDecaySchedule::new(0.001, 0.9, 0).is_err());
    }
}
