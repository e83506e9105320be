use rand::Rng;

use super::config::{MolganConfig, SamplingMode};
use super::MolganError;
use crate::diff::{DiffError, Tensor};
use crate::graphs::{GraphSpec, GraphTensors};
use crate::nn::{Linear, Mlp, Parameters};
use crate::rng::RunRng;

/// A batch of dense graphs: `x` is B×N×D, `a` is B×N×N×Y.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub x: Tensor,
    pub a: Tensor,
}

impl GraphBatch {
    pub fn from_graphs(graphs: &[&GraphTensors], spec: &GraphSpec) -> Result<GraphBatch, MolganError> {
        let (n, d, y) = (spec.max_atoms, spec.node_types, spec.edge_types);
        let b = graphs.len();
        let mut x = Vec::with_capacity(b * spec.x_len());
        let mut a = Vec::with_capacity(b * spec.a_len());
        for g in graphs {
            if g.x.len() != spec.x_len() || g.a.len() != spec.a_len() {
                return Err(MolganError::Diff(DiffError::ShapeMismatch {
                    op: "graph_batch",
                    lhs: vec![g.x.len(), g.a.len()],
                    rhs: vec![spec.x_len(), spec.a_len()],
                }));
            }
            x.extend_from_slice(&g.x);
            a.extend_from_slice(&g.a);
        }
        Ok(GraphBatch { x: Tensor::new(&[b, n, d], x)?, a: Tensor::new(&[b, n, n, y], a)? })
    }

    pub fn batch_size(&self) -> usize {
        self.x.shape()[0]
    }

    /// Per-sample slices of the raw data.
    pub fn graph(&self, k: usize) -> GraphTensors {
        let xs = self.x.numel() / self.batch_size();
        let as_ = self.a.numel() / self.batch_size();
        GraphTensors {
            x: self.x.data()[k * xs..(k + 1) * xs].to_vec(),
            a: self.a.data()[k * as_..(k + 1) * as_].to_vec(),
        }
    }

    pub fn detach(&self) -> GraphBatch {
        GraphBatch { x: self.x.detach(), a: self.a.detach() }
    }
}

pub fn gumbel_noise(rng: &mut RunRng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            -(-u.ln()).ln()
        })
        .collect()
}

/// Relax `logits` along `axis` (the last one) according to `mode`.
pub fn sample_categorical(
    logits: &Tensor,
    mode: SamplingMode,
    temperature: f64,
    rng: &mut RunRng,
) -> Result<Tensor, DiffError> {
    let axis = logits.ndim() - 1;
    match mode {
        SamplingMode::Softmax => logits.softmax(axis),
        SamplingMode::Gumbel => gumbel_softmax(logits, temperature, rng),
        SamplingMode::StraightThrough => {
            let soft = gumbel_softmax(logits, temperature, rng)?;
            let k = logits.shape()[axis];
            let mut delta = vec![0.0; soft.numel()];
            for (row, out) in soft.data().chunks(k).zip(delta.chunks_mut(k)) {
                let best = argmax(row);
                for (t, o) in out.iter_mut().enumerate() {
                    *o = if t == best { 1.0 } else { 0.0 } - row[t];
                }
            }
            soft.add(&Tensor::new(soft.shape(), delta)?)
        }
    }
}

fn gumbel_softmax(logits: &Tensor, temperature: f64, rng: &mut RunRng) -> Result<Tensor, DiffError> {
    let noise = Tensor::new(logits.shape(), gumbel_noise(rng, logits.numel()))?;
    logits.add(&noise)?.mul_scalar(1.0 / temperature).softmax(logits.ndim() - 1)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// MLP from latent vectors to node and edge logits.
#[derive(Debug, Clone)]
pub struct Generator {
    pub spec: GraphSpec,
    pub body: Mlp,
    pub node_head: Linear,
    pub edge_head: Linear,
}

impl Generator {
    pub fn new(config: &MolganConfig, rng: &mut RunRng) -> Generator {
        let spec = config.spec.clone();
        let mut widths = vec![config.latent_dim];
        widths.extend(&config.generator_hidden);
        let last = *widths.last().expect("latent width");
        let body = Mlp::new(&widths, config.dropout, rng);
        let node_head = Linear::new(last, spec.x_len(), rng);
        let edge_head = Linear::new(last, spec.a_len(), rng);
        Generator { spec, body, node_head, edge_head }
    }

    /// Node logits (B×N×D) and symmetric edge logits (B×N×N×Y).
    pub fn logits(&self, z: &Tensor, training: bool, rng: &mut RunRng) -> Result<GraphBatch, DiffError> {
        let b = z.shape()[0];
        let (n, d, y) = (self.spec.max_atoms, self.spec.node_types, self.spec.edge_types);
        let h = self.body.forward(z, true, training, rng)?;
        let x = self.node_head.forward(&h)?.reshape(&[b, n, d])?;
        let a = self.edge_head.forward(&h)?.reshape(&[b, n, n, y])?;
        let a = a.add(&a.swap_axes(1, 2)?)?.mul_scalar(0.5);
        Ok(GraphBatch { x, a })
    }

    pub fn generate(
        &self,
        z: &Tensor,
        mode: SamplingMode,
        temperature: f64,
        training: bool,
        rng: &mut RunRng,
    ) -> Result<GraphBatch, DiffError> {
        let logits = self.logits(z, training, rng)?;
        Ok(GraphBatch {
            x: sample_categorical(&logits.x, mode, temperature, rng)?,
            a: sample_categorical(&logits.a, mode, temperature, rng)?,
        })
    }
}

impl Parameters for Generator {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.body.named_params("generator.body");
        out.extend(self.node_head.named_params("generator.node_head"));
        out.extend(self.edge_head.named_params("generator.edge_head"));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.body.params_mut();
        out.extend(self.node_head.params_mut());
        out.extend(self.edge_head.params_mut());
        out
    }
}

/// One relational convolution: a self transform plus one transform per bond type.
#[derive(Debug, Clone)]
pub struct RelationalConv {
    pub self_transform: Linear,
    pub edge_transforms: Vec<Linear>,
}

/// Relational graph convolutions, gated sum over nodes, then an MLP to one score per graph.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub spec: GraphSpec,
    pub convs: Vec<RelationalConv>,
    pub gate: Linear,
    pub value: Linear,
    pub dense: Mlp,
}

impl Discriminator {
    pub fn new(config: &MolganConfig, rng: &mut RunRng) -> Discriminator {
        let spec = config.spec.clone();
        let d = spec.node_types;
        let mut convs = Vec::new();
        let mut prev = 0;
        for &w in &config.discriminator.conv_widths {
            let input = prev + d;
            convs.push(RelationalConv {
                self_transform: Linear::new(input, w, rng),
                edge_transforms: (1..spec.edge_types).map(|_| Linear::new(input, w, rng)).collect(),
            });
            prev = w;
        }
        let agg = config.discriminator.aggregation_width;
        let gate = Linear::new(prev + d, agg, rng);
        let value = Linear::new(prev + d, agg, rng);
        let mut widths = vec![agg];
        widths.extend(&config.discriminator.dense_widths);
        widths.push(1);
        let dense = Mlp::new(&widths, config.dropout, rng);
        Discriminator { spec, convs, gate, value, dense }
    }

    fn check_shapes(&self, x: &Tensor, a: &Tensor) -> Result<usize, DiffError> {
        let (n, d, y) = (self.spec.max_atoms, self.spec.node_types, self.spec.edge_types);
        let b = x.shape().first().copied().unwrap_or(0);
        if x.shape() != [b, n, d] || a.shape() != [b, n, n, y] {
            return Err(DiffError::ShapeMismatch {
                op: "discriminate",
                lhs: x.shape().to_vec(),
                rhs: a.shape().to_vec(),
            });
        }
        Ok(b)
    }

    /// Scores of shape `[B]`.
    pub fn score(&self, x: &Tensor, a: &Tensor, training: bool, rng: &mut RunRng) -> Result<Tensor, DiffError> {
        let b = self.check_shapes(x, a)?;
        let n = self.spec.max_atoms;
        let norm = 1.0 / (n.saturating_sub(1)).max(1) as f64;
        let adj: Vec<Tensor> =
            (1..self.spec.edge_types).map(|y| a.slice(3, y, y + 1)?.reshape(&[b, n, n])).collect::<Result<_, _>>()?;
        let mut h: Option<Tensor> = None;
        for conv in &self.convs {
            let hx = match &h {
                None => x.clone(),
                Some(h) => Tensor::concat(&[h, x], 2)?,
            };
            let mut msg: Option<Tensor> = None;
            for (a_y, f_y) in adj.iter().zip(&conv.edge_transforms) {
                let m = a_y.matmul(&f_y.forward(&hx)?)?;
                msg = Some(match msg {
                    None => m,
                    Some(acc) => acc.add(&m)?,
                });
            }
            let mut pre = conv.self_transform.forward(&hx)?;
            if let Some(m) = msg {
                pre = pre.add(&m.mul_scalar(norm))?;
            }
            h = Some(pre.tanh());
        }
        let h = h.expect("at least one convolution");
        let hx = Tensor::concat(&[&h, x], 2)?;
        let gated = self.gate.forward(&hx)?.sigmoid().mul(&self.value.forward(&hx)?.tanh())?;
        let pooled = gated.sum_axis(1)?.tanh();
        self.dense.forward(&pooled, false, training, rng)?.reshape(&[b])
    }
}

impl Parameters for Discriminator {
    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, conv) in self.convs.iter().enumerate() {
            out.extend(conv.self_transform.named_params(&format!("discriminator.conv{l}.self")));
            for (k, f) in conv.edge_transforms.iter().enumerate() {
                out.extend(f.named_params(&format!("discriminator.conv{l}.edge{}", k + 1)));
            }
        }
        out.extend(self.gate.named_params("discriminator.gate"));
        out.extend(self.value.named_params("discriminator.value"));
        out.extend(self.dense.named_params("discriminator.dense"));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for conv in &mut self.convs {
            out.extend(conv.self_transform.params_mut());
            for f in &mut conv.edge_transforms {
                out.extend(f.params_mut());
            }
        }
        out.extend(self.gate.params_mut());
        out.extend(self.value.params_mut());
        out.extend(self.dense.params_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use crate::graphs::featurize;
    use crate::rng::{stream, streams};

    fn permute_graph(g: &GraphTensors, spec: &GraphSpec, perm: &[usize]) -> GraphTensors {
        let (n, d, y) = (spec.max_atoms, spec.node_types, spec.edge_types);
        let mut x = vec![0.0; g.x.len()];
        let mut a = vec![0.0; g.a.len()];
        for i in 0..n {
            x[perm[i] * d..(perm[i] + 1) * d].copy_from_slice(&g.x[i * d..(i + 1) * d]);
            for j in 0..n {
                let src = (i * n + j) * y;
                let dst = (perm[i] * n + perm[j]) * y;
                a[dst..dst + y].copy_from_slice(&g.a[src..src + y]);
            }
        }
        GraphTensors { x, a }
    }

    #[test]
    fn softmax_mode_on_zero_logits_is_uniform() {
        let mut rng = stream(0, streams::TRAIN_NOISE);
        let out = sample_categorical(&Tensor::zeros(&[3, 4]), SamplingMode::Softmax, 1.0, &mut rng).unwrap();
        assert!(out.data().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn low_temperature_gumbel_is_one_hot_at_noisy_argmax() {
        let logits = vec![0.3, -1.0, 0.9, 0.1];
        let mut r1 = stream(3, streams::TRAIN_NOISE);
        let noise = gumbel_noise(&mut r1, 4);
        let best = argmax(&logits.iter().zip(&noise).map(|(l, g)| l + g).collect::<Vec<_>>());
        let mut r2 = stream(3, streams::TRAIN_NOISE);
        let t = Tensor::new(&[1, 4], logits).unwrap();
        let out = sample_categorical(&t, SamplingMode::Gumbel, 1e-4, &mut r2).unwrap();
        for (k, &p) in out.data().iter().enumerate() {
            assert!((p - if k == best { 1.0 } else { 0.0 }).abs() < 1e-9);
        }
    }

    #[test]
    fn straight_through_forward_is_one_hot_and_gradient_is_soft() {
        let mut rng = stream(5, streams::TRAIN_NOISE);
        let logits = Tensor::param(&[2, 3], vec![0.1, 0.5, -0.2, 1.0, 0.0, 0.3]).unwrap();
        let out = sample_categorical(&logits, SamplingMode::StraightThrough, 1.0, &mut rng).unwrap();
        for row in out.data().chunks(3) {
            let ones = row.iter().filter(|&&v| (v - 1.0).abs() < 1e-12).count();
            let zeros = row.iter().filter(|&&v| v.abs() < 1e-12).count();
            assert_eq!((ones, zeros), (1, 2));
        }
        let w = Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = crate::diff::backward(&out.mul(&w).unwrap().sum_all()).unwrap();
        assert!(g.get(&logits).unwrap().data().iter().any(|v| v.abs() > 1e-6));
    }

    #[test]
    fn generator_edges_are_symmetric() {
        let cfg = MolganConfig::default();
        let mut rng = stream(1, streams::INIT);
        let g = Generator::new(&cfg, &mut rng);
        let z = Tensor::new(&[2, 32], crate::rng::standard_normal_vec(&mut rng, 64)).unwrap();
        let out = g.logits(&z, false, &mut rng).unwrap();
        assert_eq!(out.x.shape(), &[2, 9, 5]);
        let t = out.a.swap_axes(1, 2).unwrap();
        assert_eq!(t.data(), out.a.data());
    }

    #[test]
    fn discriminator_is_permutation_invariant() {
        let cfg = MolganConfig::default();
        let spec = &cfg.spec;
        let mut rng = stream(2, streams::INIT);
        let d = Discriminator::new(&cfg, &mut rng);
        let g = featurize(&parse_smiles("CC(=O)NC#N").unwrap(), spec).unwrap();
        let perm = [4, 7, 0, 2, 8, 1, 3, 6, 5];
        let p = permute_graph(&g, spec, &perm);
        let batch = GraphBatch::from_graphs(&[&g, &p], spec).unwrap();
        let s = d.score(&batch.x, &batch.a, false, &mut rng).unwrap();
        assert!((s.data()[0] - s.data()[1]).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_scores_finite_and_shapes_checked() {
        let cfg = MolganConfig::default();
        let mut rng = stream(2, streams::INIT);
        let d = Discriminator::new(&cfg, &mut rng);
        let g = featurize(&crate::chem::Molecule::empty(), &cfg.spec).unwrap();
        let batch = GraphBatch::from_graphs(&[&g], &cfg.spec).unwrap();
        assert!(d.score(&batch.x, &batch.a, false, &mut rng).unwrap().item().is_finite());
        let bad = Tensor::zeros(&[1, 8, 5]);
        assert!(matches!(d.score(&bad, &batch.a, false, &mut rng), Err(DiffError::ShapeMismatch { .. })));
    }

    #[test]
    fn single_atom_spec_guards_neighbor_count() {
        let cfg = MolganConfig { spec: GraphSpec::new(1, 5, 4).unwrap(), ..Default::default() };
        let mut rng = stream(2, streams::INIT);
        let d = Discriminator::new(&cfg, &mut rng);
        let s = d.score(&Tensor::ones(&[1, 1, 5]), &Tensor::ones(&[1, 1, 1, 4]), false, &mut rng).unwrap();
        assert!(s.item().is_finite());
    }
}
