use std::cell::Cell;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use super::{DiffError, Result};

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Disables graph recording on this thread until dropped.
pub struct NoGradGuard {
    prev: bool,
}

pub fn no_grad() -> NoGradGuard {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    NoGradGuard { prev }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.prev));
    }
}

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Div(Tensor, Tensor),
    Neg(Tensor),
    AddScalar(Tensor),
    MulScalar(Tensor, f64),
    MatMul(Tensor, Tensor),
    Tanh(Tensor),
    Sigmoid(Tensor),
    Exp(Tensor),
    Log(Tensor),
    Softmax(Tensor, usize),
    Sum(Tensor, usize),
    L2Norm(Tensor),
    Concat(Vec<Tensor>, usize),
    Slice {
        input: Tensor,
        axis: usize,
        start: usize,
    },
    /// Embeds the input into zeros of a larger shape at `start` along `axis`.
    Pad {
        input: Tensor,
        axis: usize,
        start: usize,
    },
    Reshape(Tensor),
    SwapAxes(Tensor, usize, usize),
    BroadcastTo(Tensor),
    SumTo(Tensor),
    ClampMin(Tensor, f64),
    Dropout(Tensor, Arc<Vec<f64>>),
    LogAbsDet(Tensor),
    Inverse(Tensor),
}

pub(crate) struct Node {
    pub(crate) id: u64,
    pub(crate) shape: Vec<usize>,
    pub(crate) data: Vec<f64>,
    pub(crate) requires_grad: bool,
    pub(crate) op: Op,
}

/// Immutable n-dimensional value; cloning is shallow.
#[derive(Clone)]
pub struct Tensor(pub(crate) Arc<Node>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("data", &self.0.data)
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// (outer, axis length, inner) decomposition of a shape around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel(&shape[..axis]), shape[axis], numel(&shape[axis + 1..]))
}

pub(crate) fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let nd = a.len().max(b.len());
    let mut out = vec![0; nd];
    for k in 0..nd {
        let da = if k + a.len() >= nd { a[k + a.len() - nd] } else { 1 };
        let db = if k + b.len() >= nd { b[k + b.len() - nd] } else { 1 };
        out[k] = if da == db || db == 1 {
            da
        } else if da == 1 {
            db
        } else {
            return Err(DiffError::ShapeMismatch { op, lhs: a.to_vec(), rhs: b.to_vec() });
        };
    }
    Ok(out)
}

/// Strides of `shape` viewed inside `out` (0 on broadcast dimensions).
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let nd = out.len();
    let mut strides = vec![0; nd];
    let mut acc = 1;
    for k in (0..shape.len()).rev() {
        let ok = k + nd - shape.len();
        strides[ok] = if shape[k] == 1 { 0 } else { acc };
        acc *= shape[k];
    }
    strides
}

/// Map each flat index of `out` to the flat index of a tensor of `shape` broadcast into it.
fn broadcast_index_map(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let total = numel(out);
    let n = numel(shape);
    if shape == out {
        return (0..total).collect();
    }
    if n == 1 {
        return vec![0; total];
    }
    let trimmed: Vec<usize> = shape.iter().copied().skip_while(|&d| d == 1).collect();
    if out.ends_with(&trimmed) {
        return (0..total).map(|k| k % n).collect();
    }
    let strides = broadcast_strides(shape, out);
    let mut idx = vec![0usize; out.len()];
    let mut map = Vec::with_capacity(total);
    let mut flat = 0usize;
    for _ in 0..total {
        map.push(flat);
        for k in (0..out.len()).rev() {
            idx[k] += 1;
            flat += strides[k];
            if idx[k] < out[k] {
                break;
            }
            flat -= strides[k] * idx[k];
            idx[k] = 0;
        }
    }
    map
}

impl Tensor {
    pub(crate) fn from_op(shape: Vec<usize>, data: Vec<f64>, op: Op, parents_require_grad: bool) -> Tensor {
        debug_assert_eq!(numel(&shape), data.len());
        let record = parents_require_grad && is_grad_enabled();
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad: record,
            op: if record { op } else { Op::Leaf },
        }))
    }

    fn leaf(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Result<Tensor> {
        if numel(&shape) != data.len() {
            return Err(DiffError::InvalidArgument {
                op: "new",
                msg: format!("shape {shape:?} needs {} values, got {}", numel(&shape), data.len()),
            });
        }
        Ok(Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            op: Op::Leaf,
        })))
    }

    /// Constant tensor (no gradient).
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        Tensor::leaf(shape.to_vec(), data, false)
    }

    /// Leaf that gradients are taken with respect to.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        Tensor::leaf(shape.to_vec(), data, true)
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::leaf(Vec::new(), vec![v], false).expect("scalar shape")
    }

    pub fn full(shape: &[usize], v: f64) -> Tensor {
        Tensor::leaf(shape.to_vec(), vec![v; numel(shape)], false).expect("consistent shape")
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor::full(shape, 1.0)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.0.op, Op::Leaf)
    }

    pub(crate) fn op(&self) -> &Op {
        &self.0.op
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape());
        self.0.data[0]
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Tensor {
        Tensor::leaf(self.shape().to_vec(), self.data().to_vec(), false).expect("same shape")
    }

    /// Same values as a fresh gradient-tracking leaf.
    pub fn detach_param(&self) -> Tensor {
        Tensor::leaf(self.shape().to_vec(), self.data().to_vec(), true).expect("same shape")
    }

    fn check_axis(&self, op: &'static str, axis: usize) -> Result<()> {
        if axis >= self.ndim() {
            return Err(DiffError::InvalidArgument {
                op,
                msg: format!("axis {axis} out of range for shape {:?}", self.shape()),
            });
        }
        Ok(())
    }

    fn unary(&self, f: impl Fn(f64) -> f64, op: Op) -> Tensor {
        let data = self.data().iter().map(|&v| f(v)).collect();
        Tensor::from_op(self.shape().to_vec(), data, op, self.requires_grad())
    }

    fn binary(&self, other: &Tensor, name: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Tensor> {
        let rg = self.requires_grad() || other.requires_grad();
        if self.shape() == other.shape() {
            let data = self.data().iter().zip(other.data()).map(|(&a, &b)| f(a, b)).collect();
            return Ok(Tensor::from_op(self.shape().to_vec(), data, op, rg));
        }
        let out = broadcast_shape(name, self.shape(), other.shape())?;
        let ma = broadcast_index_map(self.shape(), &out);
        let mb = broadcast_index_map(other.shape(), &out);
        let (a, b) = (self.data(), other.data());
        let data = ma.iter().zip(&mb).map(|(&i, &j)| f(a[i], b[j])).collect();
        Ok(Tensor::from_op(out, data, op, rg))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "add", |a, b| a + b, Op::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "sub", |a, b| a - b, Op::Sub(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "mul", |a, b| a * b, Op::Mul(self.clone(), other.clone()))
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "div", |a, b| a / b, Op::Div(self.clone(), other.clone()))
    }

    pub fn neg(&self) -> Tensor {
        self.unary(|v| -v, Op::Neg(self.clone()))
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.unary(|v| v + c, Op::AddScalar(self.clone()))
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        self.unary(|v| v * c, Op::MulScalar(self.clone(), c))
    }

    pub fn square(&self) -> Tensor {
        self.mul(self).expect("same shape")
    }

    pub fn tanh(&self) -> Tensor {
        self.unary(f64::tanh, Op::Tanh(self.clone()))
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(
            |v| if v >= 0.0 { 1.0 / (1.0 + (-v).exp()) } else { v.exp() / (1.0 + v.exp()) },
            Op::Sigmoid(self.clone()),
        )
    }

    pub fn exp(&self) -> Tensor {
        self.unary(f64::exp, Op::Exp(self.clone()))
    }

    pub fn log(&self) -> Tensor {
        self.unary(f64::ln, Op::Log(self.clone()))
    }

    /// `max(x, lo)`; the gradient is passed where `x > lo`.
    pub fn clamp_min(&self, lo: f64) -> Tensor {
        self.unary(|v| v.max(lo), Op::ClampMin(self.clone(), lo))
    }

    /// `[.., m, k] @ [.., k, n]` for 2-D operands or 3-D operands with equal batch size.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), other.shape());
        let mismatch = || DiffError::ShapeMismatch { op: "matmul", lhs: sa.to_vec(), rhs: sb.to_vec() };
        let (batch, m, k, n) = match (sa.len(), sb.len()) {
            (2, 2) if sa[1] == sb[0] => (1, sa[0], sa[1], sb[1]),
            (3, 3) if sa[0] == sb[0] && sa[2] == sb[1] => (sa[0], sa[1], sa[2], sb[2]),
            _ => return Err(mismatch()),
        };
        let (a, b) = (self.data(), other.data());
        let mut out = vec![0.0; batch * m * n];
        for bi in 0..batch {
            let ao = &a[bi * m * k..(bi + 1) * m * k];
            let bo = &b[bi * k * n..(bi + 1) * k * n];
            let oo = &mut out[bi * m * n..(bi + 1) * m * n];
            for i in 0..m {
                let row = &mut oo[i * n..(i + 1) * n];
                for p in 0..k {
                    let av = ao[i * k + p];
                    if av == 0.0 {
                        continue;
                    }
                    let brow = &bo[p * n..(p + 1) * n];
                    for (o, &bv) in row.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
        }
        let shape = if sa.len() == 2 { vec![m, n] } else { vec![batch, m, n] };
        Ok(Tensor::from_op(
            shape,
            out,
            Op::MatMul(self.clone(), other.clone()),
            self.requires_grad() || other.requires_grad(),
        ))
    }

    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        self.check_axis("softmax", axis)?;
        let (outer, len, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |t: usize| (o * len + t) * inner + i;
                let max = (0..len).map(|t| x[at(t)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for t in 0..len {
                    let e = (x[at(t)] - max).exp();
                    out[at(t)] = e;
                    total += e;
                }
                for t in 0..len {
                    out[at(t)] /= total;
                }
            }
        }
        Ok(Tensor::from_op(self.shape().to_vec(), out, Op::Softmax(self.clone(), axis), self.requires_grad()))
    }

    /// Sum over `axis`, which is removed from the shape.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        self.check_axis("sum", axis)?;
        let (outer, len, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for t in 0..len {
                let src = &x[(o * len + t) * inner..(o * len + t + 1) * inner];
                for (d, &s) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let mut shape = self.shape().to_vec();
        shape.remove(axis);
        Ok(Tensor::from_op(shape, out, Op::Sum(self.clone(), axis), self.requires_grad()))
    }

    pub fn sum(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        let s = self.sum_axis(axis)?;
        if keepdim {
            s.reshape(&keep_shape(self.shape(), axis))
        } else {
            Ok(s)
        }
    }

    pub fn mean(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        self.check_axis("mean", axis)?;
        let len = self.shape()[axis] as f64;
        Ok(self.sum(axis, keepdim)?.mul_scalar(1.0 / len))
    }

    pub fn sum_all(&self) -> Tensor {
        self.reshape(&[self.numel()]).and_then(|t| t.sum_axis(0)).expect("flat sum")
    }

    pub fn mean_all(&self) -> Tensor {
        let n = self.numel() as f64;
        self.sum_all().mul_scalar(1.0 / n)
    }

    /// Euclidean norm over `axis`.
    pub fn l2_norm(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        self.check_axis("l2_norm", axis)?;
        let (outer, len, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for t in 0..len {
                for i in 0..inner {
                    let v = x[(o * len + t) * inner + i];
                    out[o * inner + i] += v * v;
                }
            }
        }
        for v in &mut out {
            *v = v.sqrt();
        }
        let shape = keep_shape(self.shape(), axis);
        let norm = Tensor::from_op(shape, out, Op::L2Norm(self.clone()), self.requires_grad());
        if keepdim {
            Ok(norm)
        } else {
            let mut s = self.shape().to_vec();
            s.remove(axis);
            norm.reshape(&s)
        }
    }

    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts.first().ok_or(DiffError::InvalidArgument { op: "concat", msg: "no inputs".into() })?;
        first.check_axis("concat", axis)?;
        for p in parts {
            let same = p.ndim() == first.ndim()
                && p.shape().iter().zip(first.shape()).enumerate().all(|(k, (a, b))| k == axis || a == b);
            if !same {
                return Err(DiffError::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let outer = numel(&first.shape()[..axis]);
        let inner = numel(&first.shape()[axis + 1..]);
        let total_len: usize = parts.iter().map(|p| p.shape()[axis]).sum();
        let mut out = Vec::with_capacity(outer * total_len * inner);
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape()[axis] * inner;
                out.extend_from_slice(&p.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total_len;
        let rg = parts.iter().any(|p| p.requires_grad());
        Ok(Tensor::from_op(shape, out, Op::Concat(parts.iter().map(|&p| p.clone()).collect(), axis), rg))
    }

    /// Elements `start..end` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, end: usize) -> Result<Tensor> {
        self.check_axis("slice", axis)?;
        if start > end || end > self.shape()[axis] {
            return Err(DiffError::InvalidArgument {
                op: "slice",
                msg: format!("range {start}..{end} out of bounds for axis {axis} of {:?}", self.shape()),
            });
        }
        let (outer, len, inner) = split_axis(self.shape(), axis);
        let width = end - start;
        let x = self.data();
        let mut out = Vec::with_capacity(outer * width * inner);
        for o in 0..outer {
            out.extend_from_slice(&x[(o * len + start) * inner..(o * len + end) * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = width;
        Ok(Tensor::from_op(shape, out, Op::Slice { input: self.clone(), axis, start }, self.requires_grad()))
    }

    /// Place `self` into zeros of `full` shape at offset `start` along `axis`.
    pub(crate) fn pad_into(&self, full: &[usize], axis: usize, start: usize) -> Tensor {
        let (outer, len, inner) = split_axis(full, axis);
        let width = self.shape()[axis];
        let mut out = vec![0.0; numel(full)];
        let x = self.data();
        for o in 0..outer {
            out[(o * len + start) * inner..(o * len + start + width) * inner]
                .copy_from_slice(&x[o * width * inner..(o + 1) * width * inner]);
        }
        Tensor::from_op(full.to_vec(), out, Op::Pad { input: self.clone(), axis, start }, self.requires_grad())
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(DiffError::ShapeMismatch { op: "reshape", lhs: self.shape().to_vec(), rhs: shape.to_vec() });
        }
        Ok(Tensor::from_op(shape.to_vec(), self.data().to_vec(), Op::Reshape(self.clone()), self.requires_grad()))
    }

    pub fn swap_axes(&self, a: usize, b: usize) -> Result<Tensor> {
        self.check_axis("swap_axes", a)?;
        self.check_axis("swap_axes", b)?;
        let shape = self.shape();
        let mut out_shape = shape.to_vec();
        out_shape.swap(a, b);
        let nd = shape.len();
        let mut in_strides = vec![1; nd];
        for k in (0..nd.saturating_sub(1)).rev() {
            in_strides[k] = in_strides[k + 1] * shape[k + 1];
        }
        let mut perm_strides = in_strides.clone();
        perm_strides.swap(a, b);
        let x = self.data();
        let mut out = Vec::with_capacity(x.len());
        let mut idx = vec![0usize; nd];
        let mut flat = 0usize;
        for _ in 0..x.len() {
            out.push(x[flat]);
            for k in (0..nd).rev() {
                idx[k] += 1;
                flat += perm_strides[k];
                if idx[k] < out_shape[k] {
                    break;
                }
                flat -= perm_strides[k] * idx[k];
                idx[k] = 0;
            }
        }
        Ok(Tensor::from_op(out_shape, out, Op::SwapAxes(self.clone(), a, b), self.requires_grad()))
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        let out = broadcast_shape("broadcast_to", self.shape(), shape)?;
        if out != shape {
            return Err(DiffError::ShapeMismatch {
                op: "broadcast_to",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        if self.shape() == shape {
            return Ok(self.clone());
        }
        let x = self.data();
        let data = broadcast_index_map(self.shape(), shape).into_iter().map(|i| x[i]).collect();
        Ok(Tensor::from_op(shape.to_vec(), data, Op::BroadcastTo(self.clone()), self.requires_grad()))
    }

    /// Sum broadcast dimensions away so the result has `shape`.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Tensor> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        let back = broadcast_shape("sum_to", shape, self.shape())?;
        if back != self.shape() {
            return Err(DiffError::ShapeMismatch { op: "sum_to", lhs: self.shape().to_vec(), rhs: shape.to_vec() });
        }
        let mut out = vec![0.0; numel(shape)];
        for (k, i) in broadcast_index_map(shape, self.shape()).into_iter().enumerate() {
            out[i] += self.data()[k];
        }
        Ok(Tensor::from_op(shape.to_vec(), out, Op::SumTo(self.clone()), self.requires_grad()))
    }

    /// Inverted dropout. Identity when not training or `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&self, p: f64, training: bool, rng: &mut R) -> Result<Tensor> {
        if !(0.0..1.0).contains(&p) {
            return Err(DiffError::InvalidArgument { op: "dropout", msg: format!("p = {p} outside [0, 1)") });
        }
        if !training || p == 0.0 {
            return Ok(self.clone());
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.numel()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        let data = self.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::Dropout(self.clone(), Arc::new(mask)),
            self.requires_grad(),
        ))
    }

    /// `log |det W|` of a square matrix.
    pub fn logabsdet(&self) -> Result<Tensor> {
        let n = self.square_dim("logabsdet")?;
        let m = nalgebra::DMatrix::from_row_slice(n, n, self.data());
        let det = m.determinant();
        Ok(Tensor::from_op(Vec::new(), vec![det.abs().ln()], Op::LogAbsDet(self.clone()), self.requires_grad()))
    }

    /// Matrix inverse of a square matrix; fails with `Singular` when `|det| <= 1e-12`.
    pub fn inverse(&self) -> Result<Tensor> {
        let n = self.square_dim("inverse")?;
        let m = nalgebra::DMatrix::from_row_slice(n, n, self.data());
        let det = m.determinant();
        if det.is_nan() || det.abs() <= 1e-12 {
            return Err(DiffError::Singular(det));
        }
        let inv = m.try_inverse().ok_or(DiffError::Singular(det))?;
        let data = inv.transpose().as_slice().to_vec();
        Ok(Tensor::from_op(vec![n, n], data, Op::Inverse(self.clone()), self.requires_grad()))
    }

    pub(crate) fn square_dim(&self, op: &'static str) -> Result<usize> {
        match self.shape() {
            [r, c] if r == c => Ok(*r),
            s => Err(DiffError::ShapeMismatch { op, lhs: s.to_vec(), rhs: s.to_vec() }),
        }
    }
}

pub(crate) fn keep_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s[axis] = 1;
    s
}
