use std::collections::{HashMap, HashSet};

use super::tensor::{keep_shape, no_grad, Op, Tensor};
use super::{DiffError, Result};

/// Gradients keyed by tensor identity.
#[derive(Debug, Default)]
pub struct Gradients {
    map: HashMap<u64, Tensor>,
}

impl Gradients {
    pub fn get(&self, t: &Tensor) -> Option<&Tensor> {
        self.map.get(&t.id())
    }

    /// Gradient of `t`, or zeros when the loss does not depend on it.
    pub fn get_or_zeros(&self, t: &Tensor) -> Tensor {
        self.get(t).cloned().unwrap_or_else(|| Tensor::zeros(t.shape()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Gradients of a scalar loss for every gradient-tracking leaf it depends on.
pub fn backward(loss: &Tensor) -> Result<Gradients> {
    let all = propagate(loss, false)?;
    let leaves: HashSet<u64> = topo_order(loss).iter().filter(|t| t.is_leaf()).map(|t| t.id()).collect();
    Ok(Gradients { map: all.into_iter().filter(|(id, _)| leaves.contains(id)).collect() })
}

/// Gradients of a scalar `output` with respect to `inputs`. With `create_graph` the
/// returned tensors are themselves part of the graph and can be differentiated again.
pub fn grad(output: &Tensor, inputs: &[&Tensor], create_graph: bool) -> Result<Vec<Tensor>> {
    let map = propagate(output, create_graph)?;
    Ok(inputs.iter().map(|t| map.get(&t.id()).cloned().unwrap_or_else(|| Tensor::zeros(t.shape()))).collect())
}

fn propagate(output: &Tensor, create_graph: bool) -> Result<HashMap<u64, Tensor>> {
    if output.numel() != 1 {
        return Err(DiffError::NonScalarLoss(output.shape().to_vec()));
    }
    let order = topo_order(output);
    let _guard = (!create_graph).then(no_grad);
    let mut grads: HashMap<u64, Tensor> = HashMap::new();
    grads.insert(output.id(), Tensor::ones(output.shape()));
    for node in order.iter().rev() {
        let Some(g) = grads.get(&node.id()).cloned() else { continue };
        if node.is_leaf() {
            continue;
        }
        for (parent, pg) in vjp(node, &g, create_graph)? {
            if !parent.requires_grad() {
                continue;
            }
            debug_assert_eq!(parent.shape(), pg.shape(), "gradient shape for {:?}", node.op());
            let acc = match grads.remove(&parent.id()) {
                Some(prev) => prev.add(&pg)?,
                None => pg,
            };
            grads.insert(parent.id(), acc);
        }
    }
    Ok(grads)
}

fn parents(op: &Op) -> Vec<&Tensor> {
    match op {
        Op::Leaf => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMul(a, b) => vec![a, b],
        Op::Concat(parts, _) => parts.iter().collect(),
        Op::Neg(a)
        | Op::AddScalar(a)
        | Op::MulScalar(a, _)
        | Op::Tanh(a)
        | Op::Sigmoid(a)
        | Op::Exp(a)
        | Op::Log(a)
        | Op::Softmax(a, _)
        | Op::Sum(a, _)
        | Op::L2Norm(a)
        | Op::Slice { input: a, .. }
        | Op::Pad { input: a, .. }
        | Op::Reshape(a)
        | Op::SwapAxes(a, _, _)
        | Op::BroadcastTo(a)
        | Op::SumTo(a)
        | Op::ClampMin(a, _)
        | Op::Dropout(a, _)
        | Op::LogAbsDet(a)
        | Op::Inverse(a) => vec![a],
    }
}

/// Post-order over gradient-tracking nodes reachable from `root`.
fn topo_order(root: &Tensor) -> Vec<Tensor> {
    let mut order = Vec::new();
    let mut seen = HashSet::new();
    let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if !seen.insert(t.id()) {
            continue;
        }
        stack.push((t.clone(), true));
        for p in parents(t.op()) {
            if p.requires_grad() && !seen.contains(&p.id()) {
                stack.push((p.clone(), false));
            }
        }
    }
    order
}

/// Vector-Jacobian products for one node, expressed with differentiable ops.
fn vjp(out: &Tensor, g: &Tensor, create_graph: bool) -> Result<Vec<(Tensor, Tensor)>> {
    Ok(match out.op() {
        Op::Leaf => vec![],
        Op::Add(a, b) => vec![(a.clone(), g.sum_to(a.shape())?), (b.clone(), g.sum_to(b.shape())?)],
        Op::Sub(a, b) => vec![(a.clone(), g.sum_to(a.shape())?), (b.clone(), g.neg().sum_to(b.shape())?)],
        Op::Mul(a, b) => vec![(a.clone(), g.mul(b)?.sum_to(a.shape())?), (b.clone(), g.mul(a)?.sum_to(b.shape())?)],
        Op::Div(a, b) => {
            vec![(a.clone(), g.div(b)?.sum_to(a.shape())?), (b.clone(), g.mul(out)?.div(b)?.neg().sum_to(b.shape())?)]
        }
        Op::Neg(a) => vec![(a.clone(), g.neg())],
        Op::AddScalar(a) => vec![(a.clone(), g.clone())],
        Op::MulScalar(a, c) => vec![(a.clone(), g.mul_scalar(*c))],
        Op::MatMul(a, b) => {
            let (r, c) = (a.ndim() - 2, a.ndim() - 1);
            vec![(a.clone(), g.matmul(&b.swap_axes(r, c)?)?), (b.clone(), a.swap_axes(r, c)?.matmul(g)?)]
        }
        Op::Tanh(a) => vec![(a.clone(), g.mul(&out.square().neg().add_scalar(1.0))?)],
        Op::Sigmoid(a) => vec![(a.clone(), g.mul(&out.mul(&out.neg().add_scalar(1.0))?)?)],
        Op::Exp(a) => vec![(a.clone(), g.mul(out)?)],
        Op::Log(a) => vec![(a.clone(), g.div(a)?)],
        Op::Softmax(a, axis) => {
            let dot = g.mul(out)?.sum(*axis, true)?;
            vec![(a.clone(), out.mul(&g.sub(&dot)?)?)]
        }
        Op::Sum(a, axis) => vec![(a.clone(), g.reshape(&keep_shape(a.shape(), *axis))?.broadcast_to(a.shape())?)],
        Op::L2Norm(a) => {
            let scale = g.div(&out.clamp_min(f64::MIN_POSITIVE))?;
            vec![(a.clone(), a.mul(&scale)?)]
        }
        Op::Concat(parts, axis) => {
            let mut offset = 0;
            let mut res = Vec::with_capacity(parts.len());
            for p in parts {
                let w = p.shape()[*axis];
                res.push((p.clone(), g.slice(*axis, offset, offset + w)?));
                offset += w;
            }
            res
        }
        Op::Slice { input, axis, start } => vec![(input.clone(), g.pad_into(input.shape(), *axis, *start))],
        Op::Pad { input, axis, start } => {
            let w = input.shape()[*axis];
            vec![(input.clone(), g.slice(*axis, *start, *start + w)?)]
        }
        Op::Reshape(a) => vec![(a.clone(), g.reshape(a.shape())?)],
        Op::SwapAxes(a, i, j) => vec![(a.clone(), g.swap_axes(*i, *j)?)],
        Op::BroadcastTo(a) => vec![(a.clone(), g.sum_to(a.shape())?)],
        Op::SumTo(a) => vec![(a.clone(), g.broadcast_to(a.shape())?)],
        Op::ClampMin(a, lo) => {
            let mask: Vec<f64> = a.data().iter().map(|&v| if v > *lo { 1.0 } else { 0.0 }).collect();
            vec![(a.clone(), g.mul(&Tensor::new(a.shape(), mask)?)?)]
        }
        Op::Dropout(a, mask) => {
            if create_graph {
                return Err(DiffError::SecondOrderUnsupportedOp("dropout"));
            }
            vec![(a.clone(), g.mul(&Tensor::new(a.shape(), mask.to_vec())?)?)]
        }
        Op::LogAbsDet(a) => {
            if create_graph {
                return Err(DiffError::SecondOrderUnsupportedOp("logabsdet"));
            }
            let n = a.square_dim("logabsdet")?;
            let m = nalgebra::DMatrix::from_row_slice(n, n, a.data());
            let inv = m.try_inverse().ok_or(DiffError::Singular(0.0))?;
            // d log|det W| / dW = W^{-T}; row-major of W^{-T} is column-major of W^{-1}
            let inv_t: Vec<f64> = inv.as_slice().to_vec();
            vec![(a.clone(), Tensor::new(a.shape(), inv_t)?.mul(g)?)]
        }
        Op::Inverse(a) => {
            // d(W^{-1}) = -W^{-1} dW W^{-1}
            let inv_t = out.swap_axes(0, 1)?;
            vec![(a.clone(), inv_t.matmul(g)?.matmul(&inv_t)?.neg())]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let x = Tensor::param(&[], vec![3.0]).unwrap();
        let y = x.mul(&x).unwrap();
        let g = grad(&y, &[&x], false).unwrap();
        assert_eq!(g[0].item(), 6.0);
    }

    #[test]
    fn fan_out_accumulates() {
        let x = Tensor::param(&[], vec![1.5]).unwrap();
        let y = x.add(&x).unwrap();
        assert_eq!(grad(&y, &[&x], false).unwrap()[0].item(), 2.0);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(backward(&x.tanh()), Err(DiffError::NonScalarLoss(_))));
    }

    #[test]
    fn cubic_second_order() {
        let x = Tensor::param(&[], vec![2.0]).unwrap();
        let f = x.mul(&x).unwrap().mul(&x).unwrap();
        let g = grad(&f, &[&x], true).unwrap().remove(0);
        assert_eq!(g.item(), 12.0);
        let gg = grad(&g.square(), &[&x], false).unwrap().remove(0);
        assert_eq!(gg.item(), 288.0);
    }

    #[test]
    fn tanh_second_derivative_at_zero() {
        let x = Tensor::param(&[], vec![0.0]).unwrap();
        let g = grad(&x.tanh(), &[&x], true).unwrap().remove(0);
        assert_eq!(g.item(), 1.0);
        let gg = grad(&g, &[&x], false).unwrap().remove(0);
        assert_eq!(gg.item(), 0.0);
    }

    #[test]
    fn dropout_refuses_second_order() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::param(&[8], vec![0.5; 8]).unwrap();
        let y = x.dropout(0.25, true, &mut rng).unwrap().sum_all();
        assert_eq!(grad(&y, &[&x], true).unwrap_err(), DiffError::SecondOrderUnsupportedOp("dropout"));
        assert!(grad(&y, &[&x], false).is_ok());
        let eval = x.dropout(0.25, false, &mut rng).unwrap().sum_all();
        assert!(grad(&eval, &[&x], true).is_ok());
    }

    #[test]
    fn backward_collects_leaves_only() {
        let w = Tensor::param(&[2], vec![1.0, -1.0]).unwrap();
        let c = Tensor::new(&[2], vec![3.0, 4.0]).unwrap();
        let loss = w.mul(&c).unwrap().tanh().sum_all();
        let grads = backward(&loss).unwrap();
        assert_eq!(grads.len(), 1);
        assert!(grads.get(&c).is_none());
        assert_eq!(grads.get(&w).unwrap().shape(), &[2]);
    }

    #[test]
    fn unused_input_gets_zeros() {
        let a = Tensor::param(&[3], vec![1.0; 3]).unwrap();
        let b = Tensor::param(&[2], vec![1.0; 2]).unwrap();
        let g = grad(&a.sum_all(), &[&a, &b], false).unwrap();
        assert_eq!(g[1].data(), &[0.0, 0.0]);
    }
}
