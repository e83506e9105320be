//! Dense layers shared by the GAN and the flow.

use rand::Rng;

use crate::diff::{Result, Tensor};
use crate::rng::RunRng;

/// Named parameter access used by optimizers and checkpoints.
pub trait Parameters {
    fn named_params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn params(&self) -> Vec<Tensor> {
        self.named_params().into_iter().map(|(_, t)| t.clone()).collect()
    }
}

/// `y = x W + b` applied over the last axis.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Glorot-uniform weights, zero bias.
    pub fn new(input: usize, output: usize, rng: &mut RunRng) -> Linear {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let w = (0..input * output).map(|_| rng.random_range(-limit..limit)).collect();
        Linear {
            weight: Tensor::param(&[input, output], w).expect("weight shape"),
            bias: Tensor::param(&[output], vec![0.0; output]).expect("bias shape"),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Linear {
        Linear {
            weight: Tensor::param(&[input, output], vec![0.0; input * output]).expect("weight shape"),
            bias: Tensor::param(&[output], vec![0.0; output]).expect("bias shape"),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape();
        let input = *shape.last().unwrap_or(&0);
        let rows = x.numel() / input.max(1);
        let flat = if shape.len() == 2 { x.clone() } else { x.reshape(&[rows, input])? };
        let y = flat.matmul(&self.weight)?.add(&self.bias)?;
        if shape.len() == 2 {
            Ok(y)
        } else {
            let mut out = shape.to_vec();
            *out.last_mut().expect("non-empty shape") = self.output_dim();
            y.reshape(&out)
        }
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        vec![(format!("{prefix}.weight"), &self.weight), (format!("{prefix}.bias"), &self.bias)]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Stack of linear layers with tanh between them (none after the last) and optional dropout
/// after each hidden activation.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub dropout: f64,
}

impl Mlp {
    pub fn new(widths: &[usize], dropout: f64, rng: &mut RunRng) -> Mlp {
        let layers = widths.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect();
        Mlp { layers, dropout }
    }

    /// Hidden layers use tanh; set `activate_last` to also apply it after the final layer.
    pub fn forward(&self, x: &Tensor, activate_last: bool, training: bool, rng: &mut RunRng) -> Result<Tensor> {
        let mut h = x.clone();
        let n = self.layers.len();
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if k + 1 < n || activate_last {
                h = h.tanh().dropout(self.dropout, training, rng)?;
            }
        }
        Ok(h)
    }

    /// Forward pass without dropout.
    pub fn forward_eval(&self, x: &Tensor, activate_last: bool) -> Result<Tensor> {
        let mut h = x.clone();
        let n = self.layers.len();
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if k + 1 < n || activate_last {
                h = h.tanh();
            }
        }
        Ok(h)
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        self.layers.iter().enumerate().flat_map(|(k, l)| l.named_params(&format!("{prefix}.{k}"))).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, streams};

    #[test]
    fn linear_keeps_leading_axes() {
        let mut rng = stream(0, streams::INIT);
        let l = Linear::new(3, 2, &mut rng);
        let x = Tensor::ones(&[4, 5, 3]);
        let y = l.forward(&x).unwrap();
        assert_eq!(y.shape(), &[4, 5, 2]);
        let col0: f64 = l.weight.data().iter().step_by(2).sum();
        assert!((y.data()[0] - col0).abs() < 1e-12);
    }

    #[test]
    fn mlp_shapes_and_names() {
        let mut rng = stream(0, streams::INIT);
        let m = Mlp::new(&[4, 8, 1], 0.0, &mut rng);
        let y = m.forward(&Tensor::ones(&[2, 4]), false, true, &mut rng).unwrap();
        assert_eq!(y.shape(), &[2, 1]);
        let names: Vec<String> = m.named_params("d").into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["d.0.weight", "d.0.bias", "d.1.weight", "d.1.bias"]);
    }
}
