//! Fully connected classifier: [Linear -> ReLU -> Dropout] x depth, then a
//! linear head. Penultimate features are the last hidden activations.

use serde::{Deserialize, Serialize};

use crate::models::common::{he_init, ArchitectureConfig, ForwardCtx, ForwardNodes};
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub cfg: ArchitectureConfig,
    pub in_dim: usize,
    /// [w1, b1, ..., w_depth, b_depth, head_w, head_b]
    pub params: Vec<Tensor>,
}

impl Mlp {
    pub fn init(cfg: &ArchitectureConfig, in_dim: usize, rng: &mut SeededRng) -> Self {
        let mut params = Vec::new();
        let mut fan_in = in_dim;
        for _ in 0..cfg.depth {
            params.push(he_init(rng, fan_in, cfg.hidden));
            params.push(Tensor::zeros(&[cfg.hidden]));
            fan_in = cfg.hidden;
        }
        params.push(he_init(rng, fan_in, cfg.n_classes));
        params.push(Tensor::zeros(&[cfg.n_classes]));
        Mlp {
            cfg: cfg.clone(),
            in_dim,
            params,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.cfg.depth {
            names.push(format!("layer{l}.w"));
            names.push(format!("layer{l}.b"));
        }
        names.push("head.w".into());
        names.push("head.b".into());
        names
    }

    /// Forward from an input node of shape (n, in_dim). `param_ids` must
    /// come from registering `self.params` in order.
    pub fn forward(
        &self,
        tape: &mut Tape,
        param_ids: &[NodeId],
        x: NodeId,
        ctx: &mut ForwardCtx,
    ) -> ForwardNodes {
        let mut h = x;
        let mut activations = Vec::new();
        for l in 0..self.cfg.depth {
            let w = param_ids[2 * l];
            let b = param_ids[2 * l + 1];
            h = tape.matmul(h, w);
            h = tape.add_bias(h, b);
            h = tape.relu(h);
            h = ctx.dropout(tape, h, self.cfg.dropout);
            activations.push((format!("layer{l}.relu"), h));
        }
        let head_w = param_ids[2 * self.cfg.depth];
        let head_b = param_ids[2 * self.cfg.depth + 1];
        let logits = tape.matmul(h, head_w);
        let logits = tape.add_bias(logits, head_b);
        ForwardNodes {
            logits,
            features: h,
            activations,
        }
    }

    /// Final linear layer as (weights (h, C), bias (C)).
    pub fn last_linear(&self) -> (&Tensor, &Tensor) {
        let n = self.params.len();
        (&self.params[n - 2], &self.params[n - 1])
    }
}
