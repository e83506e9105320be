use super::FlowError;
use crate::diff::Tensor;
use crate::nn::Mlp;
use crate::rng::RunRng;

/// Smallest per-dimension variance used by the ActNorm data-dependent init.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Smallest `|det W|` accepted for a linear flow.
pub const MIN_ABS_DET: f64 = 1e-12;

fn per_sample(total: &Tensor, batch: usize) -> Result<Tensor, FlowError> {
    Ok(total.reshape(&[1])?.broadcast_to(&[batch])?)
}

/// Per-dimension affine map `x = z · exp(log_scale) + bias`.
#[derive(Debug, Clone)]
pub struct ActNorm {
    pub bias: Tensor,
    pub log_scale: Tensor,
    pub initialized: bool,
}

impl ActNorm {
    pub fn new(dim: usize) -> ActNorm {
        ActNorm {
            bias: Tensor::param(&[dim], vec![0.0; dim]).expect("dim"),
            log_scale: Tensor::param(&[dim], vec![0.0; dim]).expect("dim"),
            initialized: false,
        }
    }

    pub fn scale(&self) -> Vec<f64> {
        self.log_scale.data().iter().map(|v| v.exp()).collect()
    }

    pub fn forward(&self, z: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let x = z.mul(&self.log_scale.exp())?.add(&self.bias)?;
        Ok((x, per_sample(&self.log_scale.sum_all(), z.shape()[0])?))
    }

    pub fn inverse(&self, x: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let z = x.sub(&self.bias)?.mul(&self.log_scale.neg().exp())?;
        Ok((z, per_sample(&self.log_scale.sum_all().neg(), x.shape()[0])?))
    }

    /// Set bias and scale from the batch statistics so the inverse maps `batch` to zero
    /// mean and unit variance. Only the first call has an effect; returns whether it did.
    pub fn initialize(&mut self, batch: &Tensor) -> bool {
        if self.initialized {
            return false;
        }
        let dim = self.bias.numel();
        let rows = batch.numel() / dim.max(1);
        let mut mean = vec![0.0; dim];
        let mut var = vec![0.0; dim];
        for row in batch.data().chunks(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / rows as f64;
            }
        }
        for row in batch.data().chunks(dim) {
            for d in 0..dim {
                var[d] += (row[d] - mean[d]).powi(2) / rows as f64;
            }
        }
        let log_scale = var.iter().map(|v| 0.5 * v.max(VARIANCE_FLOOR).ln()).collect();
        self.bias = Tensor::param(&[dim], mean).expect("dim");
        self.log_scale = Tensor::param(&[dim], log_scale).expect("dim");
        self.initialized = true;
        true
    }
}

/// Affine coupling: dimensions with mask 1 pass through and condition a scale and shift
/// applied to the others. The raw scale is squashed by tanh and multiplied by a learnable
/// per-dimension bound.
#[derive(Debug, Clone)]
pub struct MaskedAffine {
    pub mask: Vec<f64>,
    pub scale_net: Mlp,
    pub shift_net: Mlp,
    pub scale_bound: Tensor,
}

impl MaskedAffine {
    /// Mask keeps dimensions with `d % 2 == parity`.
    pub fn new(dim: usize, hidden: usize, parity: usize, rng: &mut RunRng) -> MaskedAffine {
        let mask = (0..dim).map(|d| if d % 2 == parity { 1.0 } else { 0.0 }).collect();
        MaskedAffine {
            mask,
            scale_net: Mlp::new(&[dim, hidden, hidden, dim], 0.0, rng),
            shift_net: Mlp::new(&[dim, hidden, hidden, dim], 0.0, rng),
            scale_bound: Tensor::param(&[dim], vec![1.0; dim]).expect("dim"),
        }
    }

    fn masks(&self) -> (Tensor, Tensor) {
        let dim = self.mask.len();
        let keep = Tensor::new(&[dim], self.mask.clone()).expect("dim");
        let free = Tensor::new(&[dim], self.mask.iter().map(|m| 1.0 - m).collect()).expect("dim");
        (keep, free)
    }

    /// Masked scale and shift for conditioning input `u = m ⊙ input`.
    fn scale_shift(&self, u: &Tensor, free: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let s = self.scale_net.forward_eval(u, false)?.tanh().mul(&self.scale_bound)?.mul(free)?;
        let t = self.shift_net.forward_eval(u, false)?.mul(free)?;
        Ok((s, t))
    }

    pub fn forward(&self, z: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let (keep, free) = self.masks();
        let u = z.mul(&keep)?;
        let (s, t) = self.scale_shift(&u, &free)?;
        let x = u.add(&z.mul(&s.exp())?.mul(&free)?)?.add(&t)?;
        Ok((x, s.sum_axis(1)?))
    }

    pub fn inverse(&self, x: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let (keep, free) = self.masks();
        let u = x.mul(&keep)?;
        let (s, t) = self.scale_shift(&u, &free)?;
        let z = u.add(&x.sub(&t)?.mul(&s.neg().exp())?.mul(&free)?)?;
        Ok((z, s.sum_axis(1)?.neg()))
    }
}

/// `x = W z + b` with `log|det W|` as log-determinant.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearFlow {
    pub fn new(weight: Vec<f64>, bias: Vec<f64>) -> Result<LinearFlow, FlowError> {
        let dim = bias.len();
        let flow = LinearFlow { weight: Tensor::param(&[dim, dim], weight)?, bias: Tensor::param(&[dim], bias)? };
        flow.check()?;
        Ok(flow)
    }

    pub fn identity(dim: usize) -> LinearFlow {
        let mut w = vec![0.0; dim * dim];
        for d in 0..dim {
            w[d * dim + d] = 1.0;
        }
        LinearFlow::new(w, vec![0.0; dim]).expect("identity is invertible")
    }

    /// Reject weights with `|det W| <= MIN_ABS_DET`.
    pub fn check(&self) -> Result<(), FlowError> {
        let n = self.bias.numel();
        let det = nalgebra::DMatrix::from_row_slice(n, n, self.weight.data()).determinant();
        if det.abs() > MIN_ABS_DET {
            Ok(())
        } else {
            Err(FlowError::Singular(det))
        }
    }

    pub fn forward(&self, z: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let x = z.matmul(&self.weight.swap_axes(0, 1)?)?.add(&self.bias)?;
        Ok((x, per_sample(&self.weight.logabsdet()?, z.shape()[0])?))
    }

    pub fn inverse(&self, x: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        let w_inv_t = self.weight.inverse()?.swap_axes(0, 1)?;
        let z = x.sub(&self.bias)?.matmul(&w_inv_t)?;
        Ok((z, per_sample(&self.weight.logabsdet()?.neg(), x.shape()[0])?))
    }
}

#[derive(Debug, Clone)]
pub enum FlowLayer {
    ActNorm(ActNorm),
    MaskedAffine(MaskedAffine),
    Linear(LinearFlow),
}

impl FlowLayer {
    /// Latent side to data side, with `log|det ∂x/∂z|` per sample.
    pub fn forward(&self, z: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        match self {
            FlowLayer::ActNorm(l) => l.forward(z),
            FlowLayer::MaskedAffine(l) => l.forward(z),
            FlowLayer::Linear(l) => l.forward(z),
        }
    }

    /// Data side to latent side, with `log|det ∂z/∂x|` per sample.
    pub fn inverse(&self, x: &Tensor) -> Result<(Tensor, Tensor), FlowError> {
        match self {
            FlowLayer::ActNorm(l) => l.inverse(x),
            FlowLayer::MaskedAffine(l) => l.inverse(x),
            FlowLayer::Linear(l) => l.inverse(x),
        }
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        match self {
            FlowLayer::ActNorm(l) => {
                vec![(format!("{prefix}.actnorm.bias"), &l.bias), (format!("{prefix}.actnorm.log_scale"), &l.log_scale)]
            }
            FlowLayer::MaskedAffine(l) => {
                let mut out = l.scale_net.named_params(&format!("{prefix}.affine.scale_net"));
                out.extend(l.shift_net.named_params(&format!("{prefix}.affine.shift_net")));
                out.push((format!("{prefix}.affine.scale_bound"), &l.scale_bound));
                out
            }
            FlowLayer::Linear(l) => {
                vec![(format!("{prefix}.linear.weight"), &l.weight), (format!("{prefix}.linear.bias"), &l.bias)]
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            FlowLayer::ActNorm(l) => vec![&mut l.bias, &mut l.log_scale],
            FlowLayer::MaskedAffine(l) => {
                let mut out = l.scale_net.params_mut();
                out.extend(l.shift_net.params_mut());
                out.push(&mut l.scale_bound);
                out
            }
            FlowLayer::Linear(l) => vec![&mut l.weight, &mut l.bias],
        }
    }
}
