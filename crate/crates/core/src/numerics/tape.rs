//! Wengert tape for reverse-mode automatic differentiation.
//!
//! Operations are recorded eagerly: each call computes the forward value
//! and pushes a node describing how to propagate gradients. `backward`
//! walks the list in reverse and accumulates vector-Jacobian products.
//! A tape belongs to a single training or scoring step and is dropped
//! afterwards; parameters are registered fresh on every step.

use crate::error::{Error, Result};
use crate::numerics::tensor::{matmul_into, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    /// `x [.., d] + bias [d]`, bias broadcast over leading axes.
    AddBias(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    /// 2-D matrix product.
    Matmul(NodeId, NodeId),
    Transpose2d(NodeId),
    /// Batched matmul over the leading axis: `[b,m,k] @ [b,k,n]`.
    Bmm(NodeId, NodeId),
    Reshape(NodeId),
    Permute(NodeId, Vec<usize>),
    SoftmaxLast(NodeId),
    LogSoftmaxLast(NodeId),
    SumAll(NodeId),
    MeanAll(NodeId),
    /// `x [n, c] -> [n]`, out[i] = x[i, idx[i]].
    SelectClasses(NodeId, Vec<usize>),
    /// `x [v, k] -> [len(idx), k]`, out[j] = x[idx[j], :].
    GatherRows(NodeId, Vec<usize>),
    /// Normalize over the last axis, then scale/shift: gamma * xhat + beta.
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    },
    /// Normalize each column of a 2-D batch using batch statistics.
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    },
    /// out[i,j,:] = x[i,j] * w[j,:] + b[j,:]  (per-feature tokenizer).
    FeatureTokens {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    /// Prepend a learned token: `[n,t,k] -> [n,t+1,k]` with out[:,0,:] = tok.
    PrependToken {
        x: NodeId,
        tok: NodeId,
    },
    /// Stack token sequences along axis 1: `[n,t1,k] ++ [n,t2,k]`.
    ConcatTokens(NodeId, NodeId),
    /// Extract one token position: `[n,t,k] -> [n,k]`.
    SliceToken {
        x: NodeId,
        index: usize,
    },
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by node id.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to the given node, if it was reachable and
    /// required gradients. Unused nodes hold zero-equivalent `None`.
    pub fn wrt(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient tensor, zeros when the node received none.
    pub fn wrt_or_zero(&self, id: NodeId, shape: &[usize]) -> Tensor {
        self.wrt(id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape))
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Differentiable leaf (parameters, or inputs we differentiate against).
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    /// Non-differentiable leaf (inputs, masks, noise draws).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).add(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::Add(a, b), v, ng)
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let d = self.value(x).last_dim();
        assert_eq!(self.value(bias).len(), d, "bias length must equal last dim");
        let bv = self.value(bias).data().to_vec();
        let mut out = self.value(x).clone();
        for i in 0..out.rows_as_2d() {
            let row = out.row_mut(i);
            for (r, b) in row.iter_mut().zip(&bv) {
                *r += b;
            }
        }
        let ng = self.ng(x) || self.ng(bias);
        self.push(Op::AddBias(x, bias), out, ng)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).sub(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::Sub(a, b), v, ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).mul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::Mul(a, b), v, ng)
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|v| -v);
        let ng = self.ng(x);
        self.push(Op::Neg(x), v, ng)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let v = self.value(x).scale(c);
        let ng = self.ng(x);
        self.push(Op::Scale(x, c), v, ng)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        let ng = self.ng(x);
        self.push(Op::Relu(x), v, ng)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::tanh);
        let ng = self.ng(x);
        self.push(Op::Tanh(x), v, ng)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|v| 1.0 / (1.0 + (-v).exp()));
        let ng = self.ng(x);
        self.push(Op::Sigmoid(x), v, ng)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::exp);
        let ng = self.ng(x);
        self.push(Op::Exp(x), v, ng)
    }

    pub fn ln(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(f64::ln);
        let ng = self.ng(x);
        self.push(Op::Ln(x), v, ng)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::Matmul(a, b), v, ng)
    }

    pub fn transpose2d(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).transposed();
        let ng = self.ng(x);
        self.push(Op::Transpose2d(x), v, ng)
    }

    pub fn bmm(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(av.ndim(), 3, "bmm lhs must be 3-D");
        assert_eq!(bv.ndim(), 3, "bmm rhs must be 3-D");
        let (bs, m, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
        let (bs2, k2, n) = (bv.shape()[0], bv.shape()[1], bv.shape()[2]);
        assert_eq!(bs, bs2, "bmm batch dims");
        assert_eq!(k, k2, "bmm inner dims");
        let mut out = vec![0.0; bs * m * n];
        for i in 0..bs {
            matmul_into(
                &av.data()[i * m * k..(i + 1) * m * k],
                &bv.data()[i * k * n..(i + 1) * k * n],
                m,
                k,
                n,
                &mut out[i * m * n..(i + 1) * m * n],
            );
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(Op::Bmm(a, b), Tensor::new(vec![bs, m, n], out), ng)
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> NodeId {
        let v = self.value(x).reshaped(shape);
        let ng = self.ng(x);
        self.push(Op::Reshape(x), v, ng)
    }

    pub fn permute(&mut self, x: NodeId, axes: Vec<usize>) -> NodeId {
        let v = permute_tensor(self.value(x), &axes);
        let ng = self.ng(x);
        self.push(Op::Permute(x, axes), v, ng)
    }

    /// Softmax over the last axis, max-shifted for stability.
    pub fn softmax_last(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let mut out = xv.clone();
        for i in 0..out.rows_as_2d() {
            softmax_in_place(out.row_mut(i));
        }
        let ng = self.ng(x);
        self.push(Op::SoftmaxLast(x), out, ng)
    }

    /// Log-softmax over the last axis, max-shifted for stability.
    pub fn log_softmax_last(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let mut out = xv.clone();
        for i in 0..out.rows_as_2d() {
            let row = out.row_mut(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        let ng = self.ng(x);
        self.push(Op::LogSoftmaxLast(x), out, ng)
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(x).sum());
        let ng = self.ng(x);
        self.push(Op::SumAll(x), v, ng)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let v = Tensor::scalar(xv.sum() / xv.len() as f64);
        let ng = self.ng(x);
        self.push(Op::MeanAll(x), v, ng)
    }

    pub fn select_classes(&mut self, x: NodeId, idx: Vec<usize>) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.ndim(), 2);
        let (n, c) = (xv.shape()[0], xv.shape()[1]);
        assert_eq!(idx.len(), n);
        let data = idx
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                assert!(j < c, "class index out of range");
                xv.data()[i * c + j]
            })
            .collect();
        let ng = self.ng(x);
        self.push(Op::SelectClasses(x, idx), Tensor::from_vec(data), ng)
    }

    pub fn gather_rows(&mut self, x: NodeId, idx: Vec<usize>) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.ndim(), 2);
        let k = xv.shape()[1];
        let mut data = Vec::with_capacity(idx.len() * k);
        for &r in &idx {
            data.extend_from_slice(xv.row(r));
        }
        let ng = self.ng(x);
        self.push(
            Op::GatherRows(x, idx.clone()),
            Tensor::new(vec![idx.len(), k], data),
            ng,
        )
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> NodeId {
        let xv = self.value(x);
        let gv = self.value(gamma).data().to_vec();
        let bv = self.value(beta).data().to_vec();
        let d = xv.last_dim();
        assert_eq!(gv.len(), d);
        assert_eq!(bv.len(), d);
        let mut out = xv.clone();
        for i in 0..out.rows_as_2d() {
            let row = out.row_mut(i);
            let (mean, var) = mean_var(row);
            let inv = 1.0 / (var + eps).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = gv[j] * ((*v - mean) * inv) + bv[j];
            }
        }
        let ng = self.ng(x) || self.ng(gamma) || self.ng(beta);
        self.push(
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps,
            },
            out,
            ng,
        )
    }

    /// Training-mode batchnorm over axis 0 of a 2-D batch.
    /// Returns (node, per-column batch mean, per-column batch var).
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> (NodeId, Vec<f64>, Vec<f64>) {
        let xv = self.value(x);
        assert_eq!(xv.ndim(), 2);
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        let gv = self.value(gamma).data().to_vec();
        let bv = self.value(beta).data().to_vec();
        assert_eq!(gv.len(), d);
        assert_eq!(bv.len(), d);
        let (means, vars) = column_mean_var(xv.data(), n, d);
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                let xhat = (xv.data()[i * d + j] - means[j]) / (vars[j] + eps).sqrt();
                out[i * d + j] = gv[j] * xhat + bv[j];
            }
        }
        let ng = self.ng(x) || self.ng(gamma) || self.ng(beta);
        let id = self.push(
            Op::BatchNorm {
                x,
                gamma,
                beta,
                eps,
            },
            Tensor::new(vec![n, d], out),
            ng,
        );
        (id, means, vars)
    }

    pub fn feature_tokens(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        assert_eq!(xv.ndim(), 2);
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        let k = wv.shape()[1];
        assert_eq!(wv.shape(), &[d, k]);
        assert_eq!(bv.shape(), &[d, k]);
        let mut out = vec![0.0; n * d * k];
        for i in 0..n {
            for j in 0..d {
                let xij = xv.data()[i * d + j];
                let base = (i * d + j) * k;
                for c in 0..k {
                    out[base + c] = xij * wv.data()[j * k + c] + bv.data()[j * k + c];
                }
            }
        }
        let ng = self.ng(x) || self.ng(w) || self.ng(b);
        self.push(
            Op::FeatureTokens { x, w, b },
            Tensor::new(vec![n, d, k], out),
            ng,
        )
    }

    pub fn prepend_token(&mut self, x: NodeId, tok: NodeId) -> NodeId {
        let xv = self.value(x);
        let tv = self.value(tok);
        assert_eq!(xv.ndim(), 3);
        let (n, t, k) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        assert_eq!(tv.len(), k);
        let mut out = Vec::with_capacity(n * (t + 1) * k);
        for i in 0..n {
            out.extend_from_slice(tv.data());
            out.extend_from_slice(&xv.data()[i * t * k..(i + 1) * t * k]);
        }
        let ng = self.ng(x) || self.ng(tok);
        self.push(
            Op::PrependToken { x, tok },
            Tensor::new(vec![n, t + 1, k], out),
            ng,
        )
    }

    pub fn concat_tokens(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(av.ndim(), 3);
        assert_eq!(bv.ndim(), 3);
        let (n, t1, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
        let (n2, t2, k2) = (bv.shape()[0], bv.shape()[1], bv.shape()[2]);
        assert_eq!(n, n2);
        assert_eq!(k, k2);
        let mut out = Vec::with_capacity(n * (t1 + t2) * k);
        for i in 0..n {
            out.extend_from_slice(&av.data()[i * t1 * k..(i + 1) * t1 * k]);
            out.extend_from_slice(&bv.data()[i * t2 * k..(i + 1) * t2 * k]);
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(
            Op::ConcatTokens(a, b),
            Tensor::new(vec![n, t1 + t2, k], out),
            ng,
        )
    }

    pub fn slice_token(&mut self, x: NodeId, index: usize) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.ndim(), 3);
        let (n, t, k) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        assert!(index < t);
        let mut out = Vec::with_capacity(n * k);
        for i in 0..n {
            let base = (i * t + index) * k;
            out.extend_from_slice(&xv.data()[base..base + k]);
        }
        let ng = self.ng(x);
        self.push(
            Op::SliceToken { x, index },
            Tensor::new(vec![n, k], out),
            ng,
        )
    }

    /// Reverse pass from a scalar output. Visits nodes in reverse
    /// recording order (reverse topological by construction).
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        let out_node = &self.nodes[output.0];
        if out_node.value.len() != 1 {
            return Err(Error::invalid(format!(
                "backward requires a scalar output, got shape {:?}",
                out_node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::new(
            out_node.value.shape().to_vec(),
            vec![1.0],
        ));

        for i in (0..=output.0).rev() {
            if grads[i].is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            let g = grads[i].take().unwrap();
            self.accumulate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn add_grad(&self, grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut grads[id.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    #[allow(clippy::too_many_lines)]
    fn accumulate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.add_grad(grads, *a, g.clone());
                self.add_grad(grads, *b, g.clone());
            }
            Op::AddBias(x, bias) => {
                self.add_grad(grads, *x, g.clone());
                if self.nodes[bias.0].needs_grad {
                    let d = g.last_dim();
                    let mut gb = vec![0.0; d];
                    for r in 0..g.rows_as_2d() {
                        for (s, v) in gb.iter_mut().zip(g.row(r)) {
                            *s += v;
                        }
                    }
                    self.add_grad(grads, *bias, Tensor::from_vec(gb));
                }
            }
            Op::Sub(a, b) => {
                self.add_grad(grads, *a, g.clone());
                self.add_grad(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if self.nodes[a.0].needs_grad {
                    self.add_grad(grads, *a, g.mul(self.value(*b)));
                }
                if self.nodes[b.0].needs_grad {
                    self.add_grad(grads, *b, g.mul(self.value(*a)));
                }
            }
            Op::Neg(x) => self.add_grad(grads, *x, g.map(|v| -v)),
            Op::Scale(x, c) => self.add_grad(grads, *x, g.scale(*c)),
            Op::Relu(x) => {
                let xv = self.value(*x);
                self.add_grad(grads, *x, g.zip_map(xv, |gv, x| if x > 0.0 { gv } else { 0.0 }));
            }
            Op::Tanh(x) => {
                let y = &self.nodes[i].value;
                self.add_grad(grads, *x, g.zip_map(y, |gv, y| gv * (1.0 - y * y)));
            }
            Op::Sigmoid(x) => {
                let y = &self.nodes[i].value;
                self.add_grad(grads, *x, g.zip_map(y, |gv, y| gv * y * (1.0 - y)));
            }
            Op::Exp(x) => {
                let y = &self.nodes[i].value;
                self.add_grad(grads, *x, g.mul(y));
            }
            Op::Ln(x) => {
                let xv = self.value(*x);
                self.add_grad(grads, *x, g.zip_map(xv, |gv, x| gv / x));
            }
            Op::Matmul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.nodes[a.0].needs_grad {
                    self.add_grad(grads, *a, g.matmul(&bv.transposed()));
                }
                if self.nodes[b.0].needs_grad {
                    self.add_grad(grads, *b, av.transposed().matmul(g));
                }
            }
            Op::Transpose2d(x) => self.add_grad(grads, *x, g.transposed()),
            Op::Bmm(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let (bs, m, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
                let n = bv.shape()[2];
                if self.nodes[a.0].needs_grad {
                    // dA_i = g_i @ B_i^T
                    let mut da = vec![0.0; bs * m * k];
                    for s in 0..bs {
                        let gi = &g.data()[s * m * n..(s + 1) * m * n];
                        let bi = &bv.data()[s * k * n..(s + 1) * k * n];
                        let bt = transpose_buf(bi, k, n);
                        matmul_into(gi, &bt, m, n, k, &mut da[s * m * k..(s + 1) * m * k]);
                    }
                    self.add_grad(grads, *a, Tensor::new(vec![bs, m, k], da));
                }
                if self.nodes[b.0].needs_grad {
                    // dB_i = A_i^T @ g_i
                    let mut db = vec![0.0; bs * k * n];
                    for s in 0..bs {
                        let gi = &g.data()[s * m * n..(s + 1) * m * n];
                        let ai = &av.data()[s * m * k..(s + 1) * m * k];
                        let at = transpose_buf(ai, m, k);
                        matmul_into(&at, gi, k, m, n, &mut db[s * k * n..(s + 1) * k * n]);
                    }
                    self.add_grad(grads, *b, Tensor::new(vec![bs, k, n], db));
                }
            }
            Op::Reshape(x) => {
                let xs = self.value(*x).shape().to_vec();
                self.add_grad(grads, *x, g.reshaped(xs));
            }
            Op::Permute(x, axes) => {
                let inv = invert_axes(axes);
                self.add_grad(grads, *x, permute_tensor(g, &inv));
            }
            Op::SoftmaxLast(x) => {
                let y = &self.nodes[i].value;
                let mut dx = g.clone();
                for r in 0..dx.rows_as_2d() {
                    let yr = y.row(r).to_vec();
                    let dr = dx.row_mut(r);
                    let dot: f64 = dr.iter().zip(&yr).map(|(a, b)| a * b).sum();
                    for (d, yv) in dr.iter_mut().zip(&yr) {
                        *d = yv * (*d - dot);
                    }
                }
                self.add_grad(grads, *x, dx);
            }
            Op::LogSoftmaxLast(x) => {
                let y = &self.nodes[i].value;
                let mut dx = g.clone();
                for r in 0..dx.rows_as_2d() {
                    let sum_g: f64 = dx.row(r).iter().sum();
                    let yr = y.row(r).to_vec();
                    let dr = dx.row_mut(r);
                    for (d, ly) in dr.iter_mut().zip(&yr) {
                        *d -= ly.exp() * sum_g;
                    }
                }
                self.add_grad(grads, *x, dx);
            }
            Op::SumAll(x) => {
                let s = g.scalar_value();
                let shape = self.value(*x).shape().to_vec();
                self.add_grad(grads, *x, Tensor::full(&shape, s));
            }
            Op::MeanAll(x) => {
                let xv = self.value(*x);
                let s = g.scalar_value() / xv.len() as f64;
                let shape = xv.shape().to_vec();
                self.add_grad(grads, *x, Tensor::full(&shape, s));
            }
            Op::SelectClasses(x, idx) => {
                let xv = self.value(*x);
                let mut dx = Tensor::zeros(xv.shape());
                let c = xv.shape()[1];
                for (r, &j) in idx.iter().enumerate() {
                    dx.data_mut()[r * c + j] += g.data()[r];
                }
                self.add_grad(grads, *x, dx);
            }
            Op::GatherRows(x, idx) => {
                let xv = self.value(*x);
                let k = xv.shape()[1];
                let mut dx = Tensor::zeros(xv.shape());
                for (r, &src) in idx.iter().enumerate() {
                    let dst = &mut dx.data_mut()[src * k..(src + 1) * k];
                    for (d, gv) in dst.iter_mut().zip(g.row(r)) {
                        *d += gv;
                    }
                }
                self.add_grad(grads, *x, dx);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps,
            } => {
                let xv = self.value(*x);
                let gv = self.value(*gamma).data().to_vec();
                let d = xv.last_dim();
                let rows = xv.rows_as_2d();
                let mut dx = Tensor::zeros(xv.shape());
                let mut dgamma = vec![0.0; d];
                let mut dbeta = vec![0.0; d];
                for r in 0..rows {
                    let xr = xv.row(r);
                    let gr = g.row(r);
                    let (mean, var) = mean_var(xr);
                    let inv = 1.0 / (var + eps).sqrt();
                    let xhat: Vec<f64> = xr.iter().map(|&v| (v - mean) * inv).collect();
                    let dxhat: Vec<f64> =
                        gr.iter().zip(&gv).map(|(&gv_, &ga)| gv_ * ga).collect();
                    let mean_dxhat = dxhat.iter().sum::<f64>() / d as f64;
                    let mean_dxhat_xhat =
                        dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    let dxr = dx.row_mut(r);
                    for j in 0..d {
                        dxr[j] = inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                        dgamma[j] += gr[j] * xhat[j];
                        dbeta[j] += gr[j];
                    }
                }
                self.add_grad(grads, *x, dx);
                self.add_grad(grads, *gamma, Tensor::from_vec(dgamma));
                self.add_grad(grads, *beta, Tensor::from_vec(dbeta));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                eps,
            } => {
                let xv = self.value(*x);
                let (n, d) = (xv.shape()[0], xv.shape()[1]);
                let gv = self.value(*gamma).data().to_vec();
                let (means, vars) = column_mean_var(xv.data(), n, d);
                let mut dx = Tensor::zeros(xv.shape());
                let mut dgamma = vec![0.0; d];
                let mut dbeta = vec![0.0; d];
                for j in 0..d {
                    let inv = 1.0 / (vars[j] + eps).sqrt();
                    let mut mean_dxhat = 0.0;
                    let mut mean_dxhat_xhat = 0.0;
                    for i2 in 0..n {
                        let xhat = (xv.data()[i2 * d + j] - means[j]) * inv;
                        let dxhat = g.data()[i2 * d + j] * gv[j];
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat;
                        dgamma[j] += g.data()[i2 * d + j] * xhat;
                        dbeta[j] += g.data()[i2 * d + j];
                    }
                    mean_dxhat /= n as f64;
                    mean_dxhat_xhat /= n as f64;
                    for i2 in 0..n {
                        let xhat = (xv.data()[i2 * d + j] - means[j]) * inv;
                        let dxhat = g.data()[i2 * d + j] * gv[j];
                        dx.data_mut()[i2 * d + j] =
                            inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                    }
                }
                self.add_grad(grads, *x, dx);
                self.add_grad(grads, *gamma, Tensor::from_vec(dgamma));
                self.add_grad(grads, *beta, Tensor::from_vec(dbeta));
            }
            Op::FeatureTokens { x, w, b } => {
                let xv = self.value(*x);
                let wv = self.value(*w);
                let (n, d) = (xv.shape()[0], xv.shape()[1]);
                let k = wv.shape()[1];
                if self.nodes[x.0].needs_grad {
                    let mut dx = Tensor::zeros(xv.shape());
                    for i2 in 0..n {
                        for j in 0..d {
                            let base = (i2 * d + j) * k;
                            let mut s = 0.0;
                            for c in 0..k {
                                s += g.data()[base + c] * wv.data()[j * k + c];
                            }
                            dx.data_mut()[i2 * d + j] = s;
                        }
                    }
                    self.add_grad(grads, *x, dx);
                }
                if self.nodes[w.0].needs_grad {
                    let mut dw = Tensor::zeros(wv.shape());
                    for i2 in 0..n {
                        for j in 0..d {
                            let xij = xv.data()[i2 * d + j];
                            let base = (i2 * d + j) * k;
                            for c in 0..k {
                                dw.data_mut()[j * k + c] += g.data()[base + c] * xij;
                            }
                        }
                    }
                    self.add_grad(grads, *w, dw);
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = Tensor::zeros(&[d, k]);
                    for i2 in 0..n {
                        for j in 0..d {
                            let base = (i2 * d + j) * k;
                            for c in 0..k {
                                db.data_mut()[j * k + c] += g.data()[base + c];
                            }
                        }
                    }
                    self.add_grad(grads, *b, db);
                }
            }
            Op::PrependToken { x, tok } => {
                let xv = self.value(*x);
                let (n, t, k) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                if self.nodes[x.0].needs_grad {
                    let mut dx = Vec::with_capacity(n * t * k);
                    for i2 in 0..n {
                        let base = i2 * (t + 1) * k + k;
                        dx.extend_from_slice(&g.data()[base..base + t * k]);
                    }
                    self.add_grad(grads, *x, Tensor::new(vec![n, t, k], dx));
                }
                if self.nodes[tok.0].needs_grad {
                    let mut dt = vec![0.0; k];
                    for i2 in 0..n {
                        let base = i2 * (t + 1) * k;
                        for c in 0..k {
                            dt[c] += g.data()[base + c];
                        }
                    }
                    self.add_grad(grads, *tok, Tensor::from_vec(dt));
                }
            }
            Op::ConcatTokens(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let (n, t1, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
                let t2 = bv.shape()[1];
                if self.nodes[a.0].needs_grad {
                    let mut da = Vec::with_capacity(n * t1 * k);
                    for i2 in 0..n {
                        let base = i2 * (t1 + t2) * k;
                        da.extend_from_slice(&g.data()[base..base + t1 * k]);
                    }
                    self.add_grad(grads, *a, Tensor::new(vec![n, t1, k], da));
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = Vec::with_capacity(n * t2 * k);
                    for i2 in 0..n {
                        let base = i2 * (t1 + t2) * k + t1 * k;
                        db.extend_from_slice(&g.data()[base..base + t2 * k]);
                    }
                    self.add_grad(grads, *b, Tensor::new(vec![n, t2, k], db));
                }
            }
            Op::SliceToken { x, index } => {
                let xv = self.value(*x);
                let (n, t, k) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                let mut dx = Tensor::zeros(&[n, t, k]);
                for i2 in 0..n {
                    let base = (i2 * t + index) * k;
                    let dst = &mut dx.data_mut()[base..base + k];
                    for (d, gv) in dst.iter_mut().zip(g.row(i2)) {
                        *d += gv;
                    }
                }
                self.add_grad(grads, *x, dx);
            }
        }
    }
}

/// In-place stable softmax of one row.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

fn column_mean_var(data: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut means = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            means[j] += data[i * d + j];
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut vars = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            let c = data[i * d + j] - means[j];
            vars[j] += c * c;
        }
    }
    for v in vars.iter_mut() {
        *v /= n as f64;
    }
    (means, vars)
}

fn transpose_buf(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

fn invert_axes(axes: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

fn permute_tensor(x: &Tensor, axes: &[usize]) -> Tensor {
    let shape = x.shape();
    assert_eq!(axes.len(), shape.len(), "permute axes rank mismatch");
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let nd = shape.len();
    let mut in_strides = vec![1usize; nd];
    for i in (0..nd.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let mut out = vec![0.0; x.len()];
    let mut idx = vec![0usize; nd];
    for (flat, slot) in out.iter_mut().enumerate() {
        // decode flat index in output shape
        let mut rem = flat;
        for i in (0..nd).rev() {
            idx[i] = rem % out_shape[i];
            rem /= out_shape[i];
        }
        let mut src = 0;
        for i in 0..nd {
            src += idx[i] * in_strides[axes[i]];
        }
        *slot = x.data()[src];
    }
    Tensor::new(out_shape, out)
}
