use super::model::{Discriminator, GraphBatch};
use crate::diff::{grad, DiffError, Tensor};
use crate::rng::RunRng;

#[derive(Debug, Clone)]
pub struct GpLoss {
    pub d_loss: Tensor,
    pub g_loss: Tensor,
    /// `mean D(fake) - mean D(real)`.
    pub wasserstein: f64,
    /// `α · mean (‖∇D(x̂)‖ - 1)²`.
    pub penalty: f64,
}

/// `x̂ = ε x_real + (1 - ε) x_fake` with one ε per sample, shared by `X` and `A`.
/// The result is a pair of fresh leaves so the critic can be differentiated at them.
pub fn interpolate(real: &GraphBatch, fake: &GraphBatch, eps: &[f64]) -> Result<GraphBatch, DiffError> {
    let b = real.batch_size();
    if fake.x.shape() != real.x.shape() || fake.a.shape() != real.a.shape() {
        return Err(DiffError::ShapeMismatch {
            op: "interpolate",
            lhs: real.x.shape().to_vec(),
            rhs: fake.x.shape().to_vec(),
        });
    }
    if eps.len() != b {
        return Err(DiffError::InvalidArgument {
            op: "interpolate",
            msg: format!("{} ε values for batch {b}", eps.len()),
        });
    }
    let mix = |r: &Tensor, f: &Tensor| {
        let per = r.numel() / b.max(1);
        let data = r
            .data()
            .iter()
            .zip(f.data())
            .enumerate()
            .map(|(k, (&rv, &fv))| {
                let e = eps[k / per];
                e * rv + (1.0 - e) * fv
            })
            .collect();
        Tensor::param(r.shape(), data)
    };
    Ok(GraphBatch { x: mix(&real.x, &fake.x)?, a: mix(&real.a, &fake.a)? })
}

/// Per-sample gradient norm of the critic at `at`, over `X` and `A` jointly.
pub fn critic_gradient_norm(
    d: &Discriminator,
    at: &GraphBatch,
    training: bool,
    rng: &mut RunRng,
) -> Result<Tensor, DiffError> {
    let b = at.batch_size();
    let scores = d.score(&at.x, &at.a, training, rng)?;
    let g = grad(&scores.sum_all(), &[&at.x, &at.a], true)?;
    let gx = g[0].reshape(&[b, at.x.numel() / b])?;
    let ga = g[1].reshape(&[b, at.a.numel() / b])?;
    Tensor::concat(&[&gx, &ga], 1)?.l2_norm(1, false)
}

/// WGAN-GP critic and generator losses. `training` toggles dropout in the real/fake passes;
/// `penalty_training` does the same for the interpolated pass.
#[allow(clippy::too_many_arguments)]
pub fn wgan_gp_loss(
    d: &Discriminator,
    real: &GraphBatch,
    fake: &GraphBatch,
    alpha: f64,
    eps: &[f64],
    training: bool,
    penalty_training: bool,
    rng: &mut RunRng,
) -> Result<GpLoss, DiffError> {
    let d_real = d.score(&real.x, &real.a, training, rng)?.mean_all();
    let d_fake = d.score(&fake.x, &fake.a, training, rng)?.mean_all();
    let x_hat = interpolate(&real.detach(), &fake.detach(), eps)?;
    let norm = critic_gradient_norm(d, &x_hat, penalty_training, rng)?;
    let penalty = norm.add_scalar(-1.0).square().mean_all().mul_scalar(alpha);
    let wgan = d_fake.sub(&d_real)?;
    let wasserstein = wgan.item();
    let penalty_value = penalty.item();
    Ok(GpLoss { d_loss: wgan.add(&penalty)?, g_loss: d_fake.neg(), wasserstein, penalty: penalty_value })
}

/// `-mean D(fake)`; gradients flow into whatever produced `fake`.
pub fn generator_loss(
    d: &Discriminator,
    fake: &GraphBatch,
    training: bool,
    rng: &mut RunRng,
) -> Result<Tensor, DiffError> {
    Ok(d.score(&fake.x, &fake.a, training, rng)?.mean_all().neg())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::backward;
    use crate::molgan::{DiscriminatorConfig, MolganConfig};
    use crate::nn::Parameters;
    use crate::rng::{stream, streams};
    use rand::Rng;

    fn small_config() -> MolganConfig {
        MolganConfig {
            spec: crate::graphs::GraphSpec::new(4, 3, 3).unwrap(),
            discriminator: DiscriminatorConfig { conv_widths: vec![3], aggregation_width: 4, dense_widths: vec![] },
            ..Default::default()
        }
    }

    fn random_batch(rng: &mut RunRng, b: usize, cfg: &MolganConfig) -> GraphBatch {
        let s = &cfg.spec;
        let x =
            Tensor::new(&[b, s.max_atoms, s.node_types], (0..b * s.x_len()).map(|_| rng.random()).collect()).unwrap();
        let a = Tensor::new(
            &[b, s.max_atoms, s.max_atoms, s.edge_types],
            (0..b * s.a_len()).map(|_| rng.random()).collect(),
        )
        .unwrap();
        GraphBatch { x, a }
    }

    #[test]
    fn epsilon_one_reproduces_real() {
        let cfg = small_config();
        let mut rng = stream(0, streams::EVAL);
        let real = random_batch(&mut rng, 3, &cfg);
        let fake = random_batch(&mut rng, 3, &cfg);
        let hat = interpolate(&real, &fake, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(hat.x.data(), real.x.data());
        assert_eq!(hat.a.data(), real.a.data());
        let half = interpolate(&real, &fake, &[1.0, 0.0, 0.5]).unwrap();
        let per = half.x.numel() / 3;
        assert_eq!(&half.x.data()[per..2 * per], &fake.x.data()[per..2 * per]);
    }

    #[test]
    fn constant_critic_penalty_is_alpha() {
        let cfg = small_config();
        let mut rng = stream(1, streams::INIT);
        let mut d = Discriminator::new(&cfg, &mut rng);
        for p in d.params_mut() {
            *p = Tensor::param(p.shape(), vec![0.0; p.numel()]).unwrap();
        }
        let bias = &mut d.dense.layers.last_mut().unwrap().bias;
        *bias = Tensor::param(&[1], vec![0.7]).unwrap();
        let real = random_batch(&mut rng, 4, &cfg);
        let fake = random_batch(&mut rng, 4, &cfg);
        let loss = wgan_gp_loss(&d, &real, &fake, 10.0, &[0.1, 0.4, 0.6, 0.9], false, false, &mut rng).unwrap();
        assert_eq!(loss.wasserstein, 0.0);
        assert!((loss.penalty - 10.0).abs() < 1e-12);
        assert!((loss.d_loss.item() - 10.0).abs() < 1e-12);
        assert!((loss.g_loss.item() + 0.7).abs() < 1e-12);
    }

    #[test]
    fn penalty_dropout_is_refused() {
        let cfg = MolganConfig {
            dropout: 0.25,
            discriminator: DiscriminatorConfig { dense_widths: vec![4], ..small_config().discriminator },
            ..small_config()
        };
        let mut rng = stream(1, streams::INIT);
        let d = Discriminator::new(&cfg, &mut rng);
        let real = random_batch(&mut rng, 2, &cfg);
        let fake = random_batch(&mut rng, 2, &cfg);
        let err = wgan_gp_loss(&d, &real, &fake, 10.0, &[0.5, 0.5], true, true, &mut rng).unwrap_err();
        assert_eq!(err, DiffError::SecondOrderUnsupportedOp("dropout"));
        assert!(wgan_gp_loss(&d, &real, &fake, 10.0, &[0.5, 0.5], true, false, &mut rng).is_ok());
    }

    #[test]
    fn d_loss_gradient_matches_finite_differences() {
        let cfg = small_config();
        let mut rng = stream(4, streams::INIT);
        let d = Discriminator::new(&cfg, &mut rng);
        let real = random_batch(&mut rng, 2, &cfg);
        let fake = random_batch(&mut rng, 2, &cfg);
        let eps = [0.3, 0.8];
        let loss_of = |d: &Discriminator| {
            let mut r = stream(0, 0);
            wgan_gp_loss(d, &real, &fake, 10.0, &eps, false, false, &mut r).unwrap().d_loss
        };
        let grads = backward(&loss_of(&d)).unwrap();
        let names: Vec<String> = d.named_params().into_iter().map(|(n, _)| n).collect();
        let h = 1e-6;
        for (pi, name) in names.iter().enumerate() {
            let analytic = grads.get_or_zeros(&d.params()[pi]);
            let picks: Vec<usize> = (0..analytic.numel()).take(3).collect();
            for k in picks {
                let shifted = |delta: f64| {
                    let mut dd = d.clone();
                    let p = &mut dd.params_mut()[pi];
                    let mut v = p.data().to_vec();
                    v[k] += delta;
                    **p = Tensor::param(p.shape(), v).unwrap();
                    loss_of(&dd).item()
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                let an = analytic.data()[k];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-4 || (fd - an).abs() < 1e-7, "{name}[{k}]: analytic {an}, fd {fd}");
            }
        }
    }
}
