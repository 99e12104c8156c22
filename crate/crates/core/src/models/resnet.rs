//! Residual tabular classifier: a linear stem, residual blocks with
//! batchnorm, and a batchnorm + ReLU head feeding the final linear layer.
//!
//! Block: h <- h + residual_scale * Linear2(Dropout(ReLU(Linear1(BN(h))))).
//! With residual_scale = 0 the blocks vanish and the network reduces to
//! its stem-plus-head MLP path.

use serde::{Deserialize, Serialize};

use crate::models::common::{he_init, ArchitectureConfig, ForwardCtx, ForwardNodes};
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;
use crate::rng::SeededRng;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

/// Per-batchnorm running statistics, updated during training and frozen
/// for inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    fn new(d: usize) -> Self {
        RunningStats {
            mean: vec![0.0; d],
            var: vec![1.0; d],
        }
    }

    fn update(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        for (r, &b) in self.mean.iter_mut().zip(batch_mean) {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
        }
        for (r, &b) in self.var.iter_mut().zip(batch_var) {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Resnet {
    pub cfg: ArchitectureConfig,
    pub in_dim: usize,
    /// [stem_w, stem_b,
    ///  per block: bn_g, bn_b, w1, b1, w2, b2,
    ///  head_bn_g, head_bn_b, head_w, head_b]
    pub params: Vec<Tensor>,
    /// One entry per batchnorm: blocks in order, then the head BN.
    pub running: Vec<RunningStats>,
}

impl Resnet {
    pub fn init(cfg: &ArchitectureConfig, in_dim: usize, rng: &mut SeededRng) -> Self {
        let w = cfg.hidden;
        let mut params = Vec::new();
        params.push(he_init(rng, in_dim, w));
        params.push(Tensor::zeros(&[w]));
        let mut running = Vec::new();
        for _ in 0..cfg.depth {
            params.push(Tensor::full(&[w], 1.0)); // bn gamma
            params.push(Tensor::zeros(&[w])); // bn beta
            params.push(he_init(rng, w, w));
            params.push(Tensor::zeros(&[w]));
            params.push(he_init(rng, w, w));
            params.push(Tensor::zeros(&[w]));
            running.push(RunningStats::new(w));
        }
        params.push(Tensor::full(&[w], 1.0));
        params.push(Tensor::zeros(&[w]));
        params.push(he_init(rng, w, cfg.n_classes));
        params.push(Tensor::zeros(&[cfg.n_classes]));
        running.push(RunningStats::new(w));
        Resnet {
            cfg: cfg.clone(),
            in_dim,
            params,
            running,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["stem.w".to_string(), "stem.b".to_string()];
        for b in 0..self.cfg.depth {
            for part in ["bn.g", "bn.b", "fc1.w", "fc1.b", "fc2.w", "fc2.b"] {
                names.push(format!("block{b}.{part}"));
            }
        }
        names.extend(
            ["head.bn.g", "head.bn.b", "head.w", "head.b"]
                .iter()
                .map(|s| s.to_string()),
        );
        names
    }

    /// Batchnorm node: batch statistics in training mode (recorded into the
    /// context for the running update), running statistics at inference.
    fn batchnorm(
        &self,
        tape: &mut Tape,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        bn_index: usize,
        ctx: &mut ForwardCtx,
    ) -> NodeId {
        if ctx.training {
            let (node, mean, var) = tape.batch_norm(x, gamma, beta, BN_EPS);
            ctx.bn_batch_stats.push((mean, var));
            node
        } else {
            // frozen affine transform from running statistics
            let stats = &self.running[bn_index];
            let d = stats.mean.len();
            let n = tape.value(x).shape()[0];
            let mut shift = Vec::with_capacity(n * d);
            let mut inv = Vec::with_capacity(n * d);
            for _ in 0..n {
                for j in 0..d {
                    shift.push(stats.mean[j]);
                    inv.push(1.0 / (stats.var[j] + BN_EPS).sqrt());
                }
            }
            let shift = tape.constant(Tensor::new(vec![n, d], shift));
            let inv = tape.constant(Tensor::new(vec![n, d], inv));
            let centered = tape.sub(x, shift);
            let xhat = tape.mul(centered, inv);
            // gamma * xhat + beta, broadcasting over rows
            let gammas = broadcast_rows(tape, gamma, n);
            let scaled = tape.mul(xhat, gammas);
            tape.add_bias(scaled, beta)
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        param_ids: &[NodeId],
        x: NodeId,
        ctx: &mut ForwardCtx,
    ) -> ForwardNodes {
        let mut h = tape.matmul(x, param_ids[0]);
        h = tape.add_bias(h, param_ids[1]);
        let mut activations = Vec::new();
        for b in 0..self.cfg.depth {
            let base = 2 + 6 * b;
            let bn = self.batchnorm(tape, h, param_ids[base], param_ids[base + 1], b, ctx);
            let z = tape.matmul(bn, param_ids[base + 2]);
            let z = tape.add_bias(z, param_ids[base + 3]);
            let z = tape.relu(z);
            activations.push((format!("block{b}.relu"), z));
            let z = ctx.dropout(tape, z, self.cfg.dropout);
            let z = tape.matmul(z, param_ids[base + 4]);
            let z = tape.add_bias(z, param_ids[base + 5]);
            let z = tape.scale(z, self.cfg.residual_scale);
            h = tape.add(h, z);
        }
        let base = 2 + 6 * self.cfg.depth;
        let bn = self.batchnorm(
            tape,
            h,
            param_ids[base],
            param_ids[base + 1],
            self.cfg.depth,
            ctx,
        );
        let feat = tape.relu(bn);
        activations.push(("head.relu".to_string(), feat));
        let logits = tape.matmul(feat, param_ids[base + 2]);
        let logits = tape.add_bias(logits, param_ids[base + 3]);
        ForwardNodes {
            logits,
            features: feat,
            activations,
        }
    }

    /// Fold the batch statistics captured by a training forward into the
    /// running averages. Call once per optimization step.
    pub fn update_running(&mut self, batch_stats: &[(Vec<f64>, Vec<f64>)]) {
        debug_assert_eq!(batch_stats.len(), self.running.len());
        for (r, (m, v)) in self.running.iter_mut().zip(batch_stats) {
            r.update(m, v);
        }
    }

    pub fn last_linear(&self) -> (&Tensor, &Tensor) {
        let n = self.params.len();
        (&self.params[n - 2], &self.params[n - 1])
    }
}

/// Tile a (d,) parameter vector to (n, d) via ones-column matmul so
/// gradients still flow back to the vector.
fn broadcast_rows(tape: &mut Tape, v: NodeId, n: usize) -> NodeId {
    let d = tape.value(v).len();
    let vr = tape.reshape(v, vec![1, d]);
    let col = tape.constant(Tensor::full(&[n, 1], 1.0));
    tape.matmul(col, vr)
}
