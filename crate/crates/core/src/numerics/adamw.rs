//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamWConfig {
            lr,
            ..Default::default()
        }
    }
}

/// Optimizer state: step count plus first/second moment buffers, one pair
/// per parameter tensor, allocated lazily on the first step.
pub struct AdamW {
    pub cfg: AdamWConfig,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> Self {
        AdamW {
            cfg,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over all parameters. Weight decay is decoupled: it is
    /// applied to the parameter directly, not folded into the gradient.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid(format!(
                "param/grad count mismatch: {} vs {}",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.v = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        }
        for (p, g) in params.iter().zip(grads.iter()) {
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c = &self.cfg;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            let gd = g.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                md[i] = c.beta1 * md[i] + (1.0 - c.beta1) * gd[i];
                vd[i] = c.beta2 * vd[i] + (1.0 - c.beta2) * gd[i] * gd[i];
                let m_hat = md[i] / bias1;
                let v_hat = vd[i] / bias2;
                pd[i] -= c.lr * c.weight_decay * pd[i];
                pd[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_evaluation() {
        // t=1, g=1, w=0: m_hat = 1, v_hat = 1 -> dw = -lr / (1 + eps)
        let mut opt = AdamW::new(AdamWConfig::default());
        let mut params = vec![Tensor::scalar(0.0)];
        let grads = vec![Tensor::scalar(1.0)];
        opt.step(&mut params, &grads).unwrap();
        let w = params[0].scalar_value();
        assert!((w + 1e-3).abs() < 1e-10, "got {w}");
    }

    #[test]
    fn zero_gradient_is_a_no_op_without_decay() {
        let mut opt = AdamW::new(AdamWConfig::default());
        let mut params = vec![Tensor::scalar(0.7)];
        let grads = vec![Tensor::scalar(0.0)];
        opt.step(&mut params, &grads).unwrap();
        assert_eq!(params[0].scalar_value(), 0.7);
    }

    #[test]
    fn decoupled_decay_shrinks_weight_exactly() {
        let cfg = AdamWConfig {
            weight_decay: 0.01,
            ..Default::default()
        };
        let mut opt = AdamW::new(cfg);
        let mut params = vec![Tensor::scalar(2.0)];
        let grads = vec![Tensor::scalar(0.0)];
        opt.step(&mut params, &grads).unwrap();
        // zero gradient: only the decay term w -= lr * wd * w fires
        let expected = 2.0 - 1e-3 * 0.01 * 2.0;
        assert_eq!(params[0].scalar_value(), expected);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut opt = AdamW::new(AdamWConfig::default());
        let mut params = vec![Tensor::from_vec(vec![0.0, 0.0])];
        let grads = vec![Tensor::scalar(1.0)];
        assert!(opt.step(&mut params, &grads).is_err());
    }

    #[test]
    fn step_count_increases_by_one() {
        let mut opt = AdamW::new(AdamWConfig::default());
        let mut params = vec![Tensor::scalar(0.0)];
        let grads = vec![Tensor::scalar(1.0)];
        for expect in 1..=3 {
            opt.step(&mut params, &grads).unwrap();
            assert_eq!(opt.step_count(), expect);
        }
    }
}
