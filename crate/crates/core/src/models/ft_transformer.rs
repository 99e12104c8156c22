//! Feature-tokenizer transformer for tabular data.
//!
//! Each numeric feature becomes a learned token x_j * w_j + b_j; each
//! categorical feature contributes a per-category embedding. A class token
//! is prepended, pre-norm transformer blocks process the sequence of
//! d + 1 tokens, and the head reads the class token after the final block,
//! which is also the penultimate feature vector.

use serde::{Deserialize, Serialize};

use crate::models::common::{normal_init, xavier_init, ArchitectureConfig, ForwardCtx, ForwardNodes};
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;
use crate::rng::SeededRng;

const LN_EPS: f64 = 1e-5;
/// FFN hidden width as a multiple of the token dimension.
const FFN_FACTOR: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FtTransformer {
    pub cfg: ArchitectureConfig,
    pub n_numeric: usize,
    pub cat_cardinalities: Vec<usize>,
    /// Layout:
    ///   num_w (d_num, k), num_b (d_num, k),
    ///   one embedding table (card_j, k) per categorical feature,
    ///   cls (k),
    ///   per block: ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo,
    ///              ln2_g, ln2_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2,
    ///   head_w (k, C), head_b (C)
    pub params: Vec<Tensor>,
}

const BLOCK_PARAMS: usize = 16;

impl FtTransformer {
    pub fn init(
        cfg: &ArchitectureConfig,
        n_numeric: usize,
        cat_cardinalities: &[usize],
        rng: &mut SeededRng,
    ) -> Self {
        let k = cfg.token_dim;
        let ff = FFN_FACTOR * k;
        let tok_std = 1.0 / (k as f64).sqrt();
        let mut params = Vec::new();
        params.push(normal_init(rng, &[n_numeric.max(1), k], tok_std));
        params.push(normal_init(rng, &[n_numeric.max(1), k], tok_std));
        for &card in cat_cardinalities {
            params.push(normal_init(rng, &[card, k], tok_std));
        }
        params.push(normal_init(rng, &[k], tok_std));
        for _ in 0..cfg.depth {
            params.push(Tensor::full(&[k], 1.0));
            params.push(Tensor::zeros(&[k]));
            for _ in 0..4 {
                params.push(xavier_init(rng, k, k));
                params.push(Tensor::zeros(&[k]));
            }
            params.push(Tensor::full(&[k], 1.0));
            params.push(Tensor::zeros(&[k]));
            params.push(xavier_init(rng, k, ff));
            params.push(Tensor::zeros(&[ff]));
            params.push(xavier_init(rng, ff, k));
            params.push(Tensor::zeros(&[k]));
        }
        params.push(xavier_init(rng, k, cfg.n_classes));
        params.push(Tensor::zeros(&[cfg.n_classes]));
        FtTransformer {
            cfg: cfg.clone(),
            n_numeric,
            cat_cardinalities: cat_cardinalities.to_vec(),
            params,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["tok.num_w".to_string(), "tok.num_b".to_string()];
        for j in 0..self.cat_cardinalities.len() {
            names.push(format!("tok.cat{j}.emb"));
        }
        names.push("tok.cls".into());
        for b in 0..self.cfg.depth {
            for part in [
                "ln1.g", "ln1.b", "attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv",
                "attn.bv", "attn.wo", "attn.bo", "ln2.g", "ln2.b", "ffn.w1", "ffn.b1", "ffn.w2",
                "ffn.b2",
            ] {
                names.push(format!("block{b}.{part}"));
            }
        }
        names.push("head.w".into());
        names.push("head.b".into());
        names
    }

    fn cls_index(&self) -> usize {
        2 + self.cat_cardinalities.len()
    }

    fn block_base(&self, block: usize) -> usize {
        self.cls_index() + 1 + block * BLOCK_PARAMS
    }

    fn head_index(&self) -> usize {
        self.block_base(self.cfg.depth)
    }

    /// Token sequence length including the class token.
    pub fn seq_len(&self) -> usize {
        self.n_numeric + self.cat_cardinalities.len() + 1
    }

    fn attention(
        &self,
        tape: &mut Tape,
        param_ids: &[NodeId],
        base: usize,
        x: NodeId, // (n, t, k) already layer-normed
        n: usize,
        t: usize,
        ctx: &mut ForwardCtx,
    ) -> NodeId {
        let k = self.cfg.token_dim;
        let heads = self.cfg.heads;
        let dh = k / heads;
        let flat = tape.reshape(x, vec![n * t, k]);
        let project = |tape: &mut Tape, w: NodeId, b: NodeId| {
            let p = tape.matmul(flat, w);
            tape.add_bias(p, b)
        };
        let q = project(tape, param_ids[base + 2], param_ids[base + 3]);
        let key = project(tape, param_ids[base + 4], param_ids[base + 5]);
        let v = project(tape, param_ids[base + 6], param_ids[base + 7]);

        let split = |tape: &mut Tape, m: NodeId| {
            let r = tape.reshape(m, vec![n, t, heads, dh]);
            let p = tape.permute(r, vec![0, 2, 1, 3]); // (n, h, t, dh)
            tape.reshape(p, vec![n * heads, t, dh])
        };
        let qh = split(tape, q);
        let kh = split(tape, key);
        let vh = split(tape, v);

        let kt = {
            let r = tape.reshape(kh, vec![n, heads, t, dh]);
            let p = tape.permute(r, vec![0, 1, 3, 2]); // (n, h, dh, t)
            tape.reshape(p, vec![n * heads, dh, t])
        };
        let scores = tape.bmm(qh, kt);
        let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
        let attn = tape.softmax_last(scores);
        let attn = ctx.dropout(tape, attn, self.cfg.dropout);
        let mixed = tape.bmm(attn, vh); // (n*h, t, dh)
        let merged = {
            let r = tape.reshape(mixed, vec![n, heads, t, dh]);
            let p = tape.permute(r, vec![0, 2, 1, 3]); // (n, t, h, dh)
            tape.reshape(p, vec![n * t, k])
        };
        let out = tape.matmul(merged, param_ids[base + 8]);
        let out = tape.add_bias(out, param_ids[base + 9]);
        let out = ctx.dropout(tape, out, self.cfg.dropout);
        tape.reshape(out, vec![n, t, k])
    }

    /// Forward from a numeric-feature node (n, d_num) plus categorical
    /// codes. Category indices are data, not graph nodes.
    pub fn forward(
        &self,
        tape: &mut Tape,
        param_ids: &[NodeId],
        numeric: NodeId,
        cat_codes: &[Vec<usize>],
        ctx: &mut ForwardCtx,
    ) -> ForwardNodes {
        let n = tape.value(numeric).shape()[0];
        let k = self.cfg.token_dim;
        assert_eq!(cat_codes.len(), self.cat_cardinalities.len());

        let mut tokens = if self.n_numeric > 0 {
            Some(tape.feature_tokens(numeric, param_ids[0], param_ids[1]))
        } else {
            None
        };
        for (j, codes) in cat_codes.iter().enumerate() {
            let emb = tape.gather_rows(param_ids[2 + j], codes.clone());
            let emb = tape.reshape(emb, vec![n, 1, k]);
            tokens = Some(match tokens {
                Some(t0) => tape.concat_tokens(t0, emb),
                None => emb,
            });
        }
        let tokens = tokens.expect("at least one feature required");
        let mut h = tape.prepend_token(tokens, param_ids[self.cls_index()]);
        let t = self.seq_len();

        let mut activations = Vec::new();
        for b in 0..self.cfg.depth {
            let base = self.block_base(b);
            let normed = tape.layer_norm(h, param_ids[base], param_ids[base + 1], LN_EPS);
            let attn = self.attention(tape, param_ids, base, normed, n, t, ctx);
            h = tape.add(h, attn);

            let normed2 = tape.layer_norm(h, param_ids[base + 10], param_ids[base + 11], LN_EPS);
            let flat = tape.reshape(normed2, vec![n * t, k]);
            let f1 = tape.matmul(flat, param_ids[base + 12]);
            let f1 = tape.add_bias(f1, param_ids[base + 13]);
            let f1 = tape.relu(f1);
            // class-token slice of the FFN activation, for activation-based scorers
            let ff = FFN_FACTOR * k;
            let f1_seq = tape.reshape(f1, vec![n, t, ff]);
            let f1_cls = tape.slice_token(f1_seq, 0);
            activations.push((format!("block{b}.ffn_relu_cls"), f1_cls));
            let f1 = ctx.dropout(tape, f1, self.cfg.dropout);
            let f2 = tape.matmul(f1, param_ids[base + 14]);
            let f2 = tape.add_bias(f2, param_ids[base + 15]);
            let f2 = ctx.dropout(tape, f2, self.cfg.dropout);
            let f2 = tape.reshape(f2, vec![n, t, k]);
            h = tape.add(h, f2);
        }

        let cls = tape.slice_token(h, 0);
        activations.push(("final_cls".to_string(), cls));
        let head = self.head_index();
        let logits = tape.matmul(cls, param_ids[head]);
        let logits = tape.add_bias(logits, param_ids[head + 1]);
        ForwardNodes {
            logits,
            features: cls,
            activations,
        }
    }

    pub fn last_linear(&self) -> (&Tensor, &Tensor) {
        let head = self.head_index();
        (&self.params[head], &self.params[head + 1])
    }
}
