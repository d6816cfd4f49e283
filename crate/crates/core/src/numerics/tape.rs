//! Reverse-mode gradient tape.
//!
//! Every op appends one node whose parents already exist, so node order is a
//! topological order and the backward sweep is a single reverse scan. A tape
//! serves exactly one forward/backward pass.

use std::cell::{Cell, Ref, RefCell};

use super::kernels;
use super::{NumericsError, Tensor};

const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulT(usize, usize),
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    Softmax(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gather { table: usize, ids: Vec<usize> },
    SliceCols { x: usize, start: usize },
    ConcatCols(Vec<usize>),
    RowSum(usize),
    Sum(usize),
    Reshape(usize),
    BceLogits {
        logits: usize,
        targets: Vec<f64>,
        probs: Vec<f64>,
        scale: f64,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    trainable: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.shape())
    }
}

/// Gradients of one backward pass, keyed by the trainable leaves of the tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a trainable leaf. Leaves the loss does not depend on get zeros.
    pub fn wrt(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A trainable leaf: receives a gradient in [`Tape::backward`].
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push_node(value, Op::Leaf, true, true)
    }

    /// A constant input: no gradient flows into it.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_node(value, Op::Leaf, false, false)
    }

    fn push_node(&self, value: Tensor, op: Op, needs_grad: bool, trainable: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            needs_grad,
            trainable,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, value: Tensor, op: Op, parents: &[usize]) -> Var<'_> {
        let needs_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|&p| nodes[p].needs_grad)
        };
        self.push_node(value, op, needs_grad, false)
    }

    fn value_of(&self, id: usize) -> Tensor {
        self.nodes.borrow()[id].value.clone()
    }

    /// Runs the reverse sweep from a scalar `loss`. The tape is consumed.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, NumericsError> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(NumericsError::ForeignVar);
        }
        if self.consumed.get() {
            return Err(NumericsError::TapeConsumed);
        }
        let nodes = self.nodes.borrow();
        let loss_shape = nodes[loss.id].value.shape().to_vec();
        if nodes[loss.id].value.numel() != 1 {
            return Err(NumericsError::Rank {
                expected: "scalar",
                shape: loss_shape,
            });
        }
        self.consumed.set(true);

        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            backprop_node(&nodes, node, &g, &mut grads);
            // keep leaf grads only; intermediate buffers are released as we go
        }

        let out = nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| {
                if !node.trainable {
                    return None;
                }
                let data = g.unwrap_or_else(|| vec![0.0; node.value.numel()]);
                Some(
                    Tensor::new(node.value.shape().to_vec(), data)
                        .expect("gradient matches leaf shape"),
                )
            })
            .collect();
        Ok(Gradients { grads: out })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, contrib: Vec<f64>) {
    if !nodes[id].needs_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => {
            for (e, c) in existing.iter_mut().zip(contrib) {
                *e += c;
            }
        }
        slot @ None => *slot = Some(contrib),
    }
}

/// Sums `g` (shaped like the full operand) down to a bias operand of `cols` entries.
fn reduce_to_cols(g: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for row in g.chunks(cols) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let val = |id: usize| &nodes[id].value;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            let (m, k, p) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
            if nodes[*a].needs_grad {
                accumulate(grads, nodes, *a, kernels::matmul_nt(g, bv.data(), m, p, k));
            }
            if nodes[*b].needs_grad {
                accumulate(grads, nodes, *b, kernels::matmul_tn(av.data(), g, m, k, p));
            }
        }
        Op::MatMulT(a, b) => {
            // c = a · bᵀ, a: m×k, b: p×k
            let (av, bv) = (val(*a), val(*b));
            let (m, k, p) = (av.shape()[0], av.shape()[1], bv.shape()[0]);
            if nodes[*a].needs_grad {
                accumulate(grads, nodes, *a, kernels::matmul(g, bv.data(), m, p, k));
            }
            if nodes[*b].needs_grad {
                accumulate(grads, nodes, *b, kernels::matmul_tn(g, av.data(), m, p, k));
            }
        }
        Op::Add { a, b } => {
            accumulate(grads, nodes, *a, g.to_vec());
            if nodes[*b].needs_grad {
                let bn = val(*b).numel();
                let contrib = if bn == g.len() {
                    g.to_vec()
                } else {
                    reduce_to_cols(g, bn)
                };
                accumulate(grads, nodes, *b, contrib);
            }
        }
        Op::Mul { a, b } => {
            let (av, bv) = (val(*a).data(), val(*b).data());
            let bn = bv.len();
            if nodes[*a].needs_grad {
                let contrib = g
                    .iter()
                    .enumerate()
                    .map(|(i, gi)| gi * bv[i % bn])
                    .collect();
                accumulate(grads, nodes, *a, contrib);
            }
            if nodes[*b].needs_grad {
                let full: Vec<f64> = g.iter().zip(av).map(|(gi, ai)| gi * ai).collect();
                let contrib = if bn == g.len() {
                    full
                } else {
                    reduce_to_cols(&full, bn)
                };
                accumulate(grads, nodes, *b, contrib);
            }
        }
        Op::Scale(x, s) => {
            accumulate(grads, nodes, *x, g.iter().map(|v| v * s).collect());
        }
        Op::Tanh(x) => {
            let y = node.value.data();
            let contrib = g.iter().zip(y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect();
            accumulate(grads, nodes, *x, contrib);
        }
        Op::Sigmoid(x) => {
            let y = node.value.data();
            let contrib = g.iter().zip(y).map(|(gi, yi)| gi * yi * (1.0 - yi)).collect();
            accumulate(grads, nodes, *x, contrib);
        }
        Op::Relu(x) => {
            let xin = val(*x).data();
            let contrib = g
                .iter()
                .zip(xin)
                .map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 })
                .collect();
            accumulate(grads, nodes, *x, contrib);
        }
        Op::Softmax(x) => {
            let y = node.value.data();
            let n = node.value.last_dim();
            let mut contrib = vec![0.0; y.len()];
            for ((yr, gr), cr) in y.chunks(n).zip(g.chunks(n)).zip(contrib.chunks_mut(n)) {
                let inner = kernels::dot(yr, gr);
                for j in 0..n {
                    cr[j] = yr[j] * (gr[j] - inner);
                }
            }
            accumulate(grads, nodes, *x, contrib);
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv_std,
        } => {
            let gv = val(*gain).data();
            let d = gv.len();
            if nodes[*x].needs_grad {
                let mut contrib = vec![0.0; g.len()];
                for (r, ((gr, hr), cr)) in g
                    .chunks(d)
                    .zip(xhat.chunks(d))
                    .zip(contrib.chunks_mut(d))
                    .enumerate()
                {
                    let dxhat: Vec<f64> = gr.iter().zip(gv).map(|(a, b)| a * b).collect();
                    let sum_d: f64 = dxhat.iter().sum();
                    let sum_dh = kernels::dot(&dxhat, hr);
                    let scale = inv_std[r] / d as f64;
                    for j in 0..d {
                        cr[j] = scale * (d as f64 * dxhat[j] - sum_d - hr[j] * sum_dh);
                    }
                }
                accumulate(grads, nodes, *x, contrib);
            }
            if nodes[*gain].needs_grad {
                let prod: Vec<f64> = g.iter().zip(xhat).map(|(a, b)| a * b).collect();
                accumulate(grads, nodes, *gain, reduce_to_cols(&prod, d));
            }
            if nodes[*bias].needs_grad {
                accumulate(grads, nodes, *bias, reduce_to_cols(g, d));
            }
        }
        Op::Gather { table, ids } => {
            let tv = val(*table);
            let d = tv.last_dim();
            let mut contrib = vec![0.0; tv.numel()];
            for (row, &id) in g.chunks(d).zip(ids) {
                for (c, v) in contrib[id * d..(id + 1) * d].iter_mut().zip(row) {
                    *c += v;
                }
            }
            accumulate(grads, nodes, *table, contrib);
        }
        Op::SliceCols { x, start } => {
            let xv = val(*x);
            let (rows, cols) = (xv.shape()[0], xv.shape()[1]);
            let len = node.value.shape()[1];
            let mut contrib = vec![0.0; rows * cols];
            for r in 0..rows {
                contrib[r * cols + start..r * cols + start + len]
                    .copy_from_slice(&g[r * len..(r + 1) * len]);
            }
            accumulate(grads, nodes, *x, contrib);
        }
        Op::ConcatCols(parts) => {
            let total = node.value.shape()[1];
            let rows = node.value.shape()[0];
            let mut offset = 0;
            for &p in parts {
                let w = val(p).shape()[1];
                if nodes[p].needs_grad {
                    let mut contrib = Vec::with_capacity(rows * w);
                    for r in 0..rows {
                        contrib.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                    }
                    accumulate(grads, nodes, p, contrib);
                }
                offset += w;
            }
        }
        Op::RowSum(x) => {
            let d = val(*x).last_dim();
            let contrib = g.iter().flat_map(|&gi| std::iter::repeat_n(gi, d)).collect();
            accumulate(grads, nodes, *x, contrib);
        }
        Op::Sum(x) => {
            accumulate(grads, nodes, *x, vec![g[0]; val(*x).numel()]);
        }
        Op::Reshape(x) => {
            accumulate(grads, nodes, *x, g.to_vec());
        }
        Op::BceLogits {
            logits,
            targets,
            probs,
            scale,
        } => {
            let contrib = probs
                .iter()
                .zip(targets)
                .map(|(&p, &y)| {
                    if !(kernels::PROB_EPS..=1.0 - kernels::PROB_EPS).contains(&p) {
                        0.0
                    } else {
                        g[0] * scale * (p - y)
                    }
                })
                .collect();
            accumulate(grads, nodes, *logits, contrib);
        }
    }
}

fn dim_err(op: &'static str, a: &Tensor, b: &Tensor) -> NumericsError {
    NumericsError::Dimension {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize), NumericsError> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(NumericsError::Rank {
            expected: if op.is_empty() { "matrix" } else { op },
            shape: other.to_vec(),
        }),
    }
}

/// Whether `b` can be added to / multiplied with `a`: same shape, or `b` is a
/// bias row (`[p]` or `[1, p]`) repeated over the rows of `a`.
fn broadcast_ok(a: &Tensor, b: &Tensor) -> bool {
    if a.shape() == b.shape() {
        return true;
    }
    let p = a.last_dim();
    match b.shape() {
        [q] => *q == p && a.rank() >= 1,
        [1, q] => *q == p && a.rank() >= 2,
        _ => false,
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Tensor {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    fn node_value(&self) -> Ref<'_, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    fn same_tape(&self, other: &Var<'_>) -> Result<(), NumericsError> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(NumericsError::ForeignVar)
        }
    }

    fn unary(&self, value: Tensor, op: Op) -> Var<'t> {
        self.tape.push(value, op, &[self.id])
    }

    /// `self[m×k] · rhs[k×p]`
    pub fn matmul(&self, rhs: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.same_tape(&rhs)?;
        let (a, b) = (self.value(), rhs.value());
        let (m, k) = require_matrix("matrix", &a)?;
        let (k2, p) = require_matrix("matrix", &b)?;
        if k != k2 {
            return Err(dim_err("matmul", &a, &b));
        }
        let out = Tensor::matrix(m, p, kernels::matmul(a.data(), b.data(), m, k, p))?;
        Ok(self.tape.push(out, Op::MatMul(self.id, rhs.id), &[self.id, rhs.id]))
    }

    /// `self[m×k] · rhs[p×k]ᵀ`
    pub fn matmul_t(&self, rhs: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.same_tape(&rhs)?;
        let (a, b) = (self.value(), rhs.value());
        let (m, k) = require_matrix("matrix", &a)?;
        let (p, k2) = require_matrix("matrix", &b)?;
        if k != k2 {
            return Err(dim_err("matmul_t", &a, &b));
        }
        let out = Tensor::matrix(m, p, kernels::matmul_nt(a.data(), b.data(), m, k, p))?;
        Ok(self.tape.push(out, Op::MatMulT(self.id, rhs.id), &[self.id, rhs.id]))
    }

    fn binary(
        &self,
        rhs: Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Tensor, Tensor, Tensor), NumericsError> {
        self.same_tape(&rhs)?;
        let (a, b) = (self.value(), rhs.value());
        if !broadcast_ok(&a, &b) {
            return Err(dim_err(name, &a, &b));
        }
        let bn = b.numel();
        let data = a
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, b.data()[i % bn]))
            .collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        Ok((out, a, b))
    }

    /// Elementwise sum; `rhs` may be a bias row broadcast over rows.
    pub fn add(&self, rhs: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let (out, _, _) = self.binary(rhs, "add", |x, y| x + y)?;
        Ok(self.tape.push(
            out,
            Op::Add {
                a: self.id,
                b: rhs.id,
            },
            &[self.id, rhs.id],
        ))
    }

    /// Elementwise product; `rhs` may be a row broadcast over rows.
    pub fn mul(&self, rhs: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let (out, _, _) = self.binary(rhs, "mul", |x, y| x * y)?;
        Ok(self.tape.push(
            out,
            Op::Mul {
                a: self.id,
                b: rhs.id,
            },
            &[self.id, rhs.id],
        ))
    }

    pub fn scale(&self, s: f64) -> Var<'t> {
        let out = self.node_value().map(|x| x * s);
        self.unary(out, Op::Scale(self.id, s))
    }

    pub fn tanh(&self) -> Var<'t> {
        let out = self.node_value().map(f64::tanh);
        self.unary(out, Op::Tanh(self.id))
    }

    pub fn sigmoid(&self) -> Var<'t> {
        let out = self.node_value().map(kernels::sigmoid);
        self.unary(out, Op::Sigmoid(self.id))
    }

    pub fn relu(&self) -> Var<'t> {
        let out = self.node_value().map(|x| x.max(0.0));
        self.unary(out, Op::Relu(self.id))
    }

    /// Softmax over the last axis. `mask[j] == false` excludes column `j`
    /// from every row; excluded entries come out as exactly zero.
    pub fn softmax(&self, mask: Option<&[bool]>) -> Result<Var<'t>, NumericsError> {
        let x = self.value();
        let n = x.last_dim();
        if let Some(m) = mask {
            if m.len() != n {
                return Err(NumericsError::Dimension {
                    op: "softmax mask",
                    left: x.shape().to_vec(),
                    right: vec![m.len()],
                });
            }
            if !m.iter().any(|&keep| keep) {
                return Err(NumericsError::DegenerateMask);
            }
        }
        let keep = |j: usize| mask.is_none_or(|m| m[j]);
        let mut out = vec![0.0; x.numel()];
        for (xr, orow) in x.data().chunks(n).zip(out.chunks_mut(n)) {
            let mut max = f64::NEG_INFINITY;
            for (j, &v) in xr.iter().enumerate() {
                if keep(j) && v > max {
                    max = v;
                }
            }
            let mut total = 0.0;
            for (j, &v) in xr.iter().enumerate() {
                if keep(j) {
                    let e = (v - max).exp();
                    orow[j] = e;
                    total += e;
                }
            }
            for o in orow.iter_mut() {
                *o /= total;
            }
        }
        let out = Tensor::new(x.shape().to_vec(), out)?;
        Ok(self.unary(out, Op::Softmax(self.id)))
    }

    /// Row-wise layer normalization over the last axis, followed by the
    /// affine `gain`/`bias`. Variance is the population variance.
    pub fn layer_norm(&self, gain: Var<'t>, bias: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.same_tape(&gain)?;
        self.same_tape(&bias)?;
        let (x, gv, bv) = (self.value(), gain.value(), bias.value());
        let d = x.last_dim();
        if d < 2 || x.rank() == 0 {
            return Err(NumericsError::Rank {
                expected: "last extent >= 2",
                shape: x.shape().to_vec(),
            });
        }
        if gv.shape() != [d] || bv.shape() != [d] {
            return Err(dim_err("layer_norm", &x, &gv));
        }
        let rows = x.rows();
        let mut out = vec![0.0; x.numel()];
        let mut xhat = vec![0.0; x.numel()];
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let xr = x.row(r);
            let mean = xr.iter().sum::<f64>() / d as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            for j in 0..d {
                let h = (xr[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = h * gv.data()[j] + bv.data()[j];
            }
        }
        let out = Tensor::new(x.shape().to_vec(), out)?;
        Ok(self.tape.push(
            out,
            Op::LayerNorm {
                x: self.id,
                gain: gain.id,
                bias: bias.id,
                xhat,
                inv_std,
            },
            &[self.id, gain.id, bias.id],
        ))
    }

    /// Row gather from a `[V×d]` table.
    pub fn gather_rows(&self, ids: &[usize]) -> Result<Var<'t>, NumericsError> {
        let table = self.value();
        let (v, d) = require_matrix("matrix", &table)?;
        if ids.is_empty() {
            return Err(NumericsError::ZeroExtent { shape: vec![0, d] });
        }
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(NumericsError::Index { index: id, bound: v });
            }
            out.extend_from_slice(table.row(id));
        }
        let out = Tensor::matrix(ids.len(), d, out)?;
        Ok(self.unary(
            out,
            Op::Gather {
                table: self.id,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Var<'t>, NumericsError> {
        let x = self.value();
        let (rows, cols) = require_matrix("matrix", &x)?;
        if len == 0 || start + len > cols {
            return Err(NumericsError::Index {
                index: start + len,
                bound: cols,
            });
        }
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&x.row(r)[start..start + len]);
        }
        let out = Tensor::matrix(rows, len, out)?;
        Ok(self.unary(out, Op::SliceCols { x: self.id, start }))
    }

    /// Side-by-side concatenation of matrices with equal row counts.
    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>, NumericsError> {
        let first = parts.first().ok_or(NumericsError::ZeroExtent { shape: vec![] })?;
        let values: Vec<Tensor> = parts.iter().map(Var::value).collect();
        let rows = require_matrix("matrix", &values[0])?.0;
        let mut total = 0;
        for (part, v) in parts.iter().zip(&values) {
            first.same_tape(part)?;
            let (r, c) = require_matrix("matrix", v)?;
            if r != rows {
                return Err(dim_err("concat_cols", &values[0], v));
            }
            total += c;
        }
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for v in &values {
                out.extend_from_slice(v.row(r));
            }
        }
        let out = Tensor::matrix(rows, total, out)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        Ok(first.tape.push(out, Op::ConcatCols(ids.clone()), &ids))
    }

    /// Sum over the last axis: `[m×p] → [m]`.
    pub fn row_sum(&self) -> Result<Var<'t>, NumericsError> {
        let x = self.value();
        let (m, _) = require_matrix("matrix", &x)?;
        let data = (0..m).map(|r| x.row(r).iter().sum()).collect();
        Ok(self.unary(Tensor::vector(data)?, Op::RowSum(self.id)))
    }

    /// Sum of every entry, as a scalar.
    pub fn sum(&self) -> Var<'t> {
        let total = self.node_value().data().iter().sum();
        self.unary(Tensor::scalar(total), Op::Sum(self.id))
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Var<'t>, NumericsError> {
        let out = self.value().reshape(shape)?;
        Ok(self.unary(out, Op::Reshape(self.id)))
    }

    /// Summed binary cross-entropy of `sigmoid(scale · (logits − shift))`
    /// against `targets`. Probabilities are clamped to `[ε, 1−ε]`; a clamped
    /// entry contributes no gradient.
    pub fn bce_with_logits(
        &self,
        targets: &[f64],
        shift: &[f64],
        scale: f64,
    ) -> Result<Var<'t>, NumericsError> {
        let z = self.value();
        if z.numel() != targets.len() || z.numel() != shift.len() {
            return Err(NumericsError::Dimension {
                op: "bce_with_logits",
                left: z.shape().to_vec(),
                right: vec![targets.len(), shift.len()],
            });
        }
        let probs: Vec<f64> = z
            .data()
            .iter()
            .zip(shift)
            .map(|(&zi, &si)| kernels::sigmoid(scale * (zi - si)))
            .collect();
        let loss = kernels::bce_sum(targets, &probs);
        Ok(self.unary(
            Tensor::scalar(loss),
            Op::BceLogits {
                logits: self.id,
                targets: targets.to_vec(),
                probs,
                scale,
            },
        ))
    }
}
