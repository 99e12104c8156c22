//! Shared pieces of the three architectures: configs, forward context,
//! dropout, and parameter initialization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;
use crate::rng::{normal_vec, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Mlp,
    Resnet,
    FtTransformer,
}

impl ArchKind {
    pub fn label(&self) -> &'static str {
        match self {
            ArchKind::Mlp => "mlp",
            ArchKind::Resnet => "resnet",
            ArchKind::FtTransformer => "ft_transformer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub kind: ArchKind,
    /// Hidden width (MLP layers / ResNet blocks).
    pub hidden: usize,
    /// Hidden layer or block count.
    pub depth: usize,
    pub dropout: f64,
    /// Token dimension (feature-tokenizer transformer only).
    pub token_dim: usize,
    /// Attention heads (transformer only).
    pub heads: usize,
    pub n_classes: usize,
    /// Multiplier on every residual branch (ResNet only); zero collapses
    /// the blocks to the identity, leaving the stem-plus-head MLP path.
    pub residual_scale: f64,
}

impl ArchitectureConfig {
    pub fn mlp(n_classes: usize) -> Self {
        ArchitectureConfig {
            kind: ArchKind::Mlp,
            hidden: 256,
            depth: 3,
            dropout: 0.1,
            token_dim: 0,
            heads: 1,
            n_classes,
            residual_scale: 1.0,
        }
    }

    pub fn resnet(n_classes: usize) -> Self {
        ArchitectureConfig {
            kind: ArchKind::Resnet,
            hidden: 256,
            depth: 3,
            dropout: 0.1,
            token_dim: 0,
            heads: 1,
            n_classes,
            residual_scale: 1.0,
        }
    }

    pub fn ft_transformer(n_classes: usize) -> Self {
        ArchitectureConfig {
            kind: ArchKind::FtTransformer,
            hidden: 0,
            depth: 3,
            dropout: 0.1,
            token_dim: 64,
            heads: 8,
            n_classes,
            residual_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::invalid("depth must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0,1)"));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        match self.kind {
            ArchKind::Mlp | ArchKind::Resnet => {
                if self.hidden < 1 {
                    return Err(Error::invalid("hidden width must be >= 1"));
                }
            }
            ArchKind::FtTransformer => {
                if self.heads < 1 {
                    return Err(Error::invalid("heads must be >= 1"));
                }
                if self.token_dim < 1 || self.token_dim % self.heads != 0 {
                    return Err(Error::invalid(
                        "token dimension must be positive and divisible by heads",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::invalid("epochs and batch size must be >= 1"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Per-forward execution context. Training mode draws dropout masks from
/// the supplied stream and records batchnorm batch statistics for the
/// running-average update that follows the step.
pub struct ForwardCtx<'a> {
    pub training: bool,
    pub rng: Option<&'a mut SeededRng>,
    pub bn_batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

impl<'a> ForwardCtx<'a> {
    pub fn train(rng: &'a mut SeededRng) -> Self {
        ForwardCtx {
            training: true,
            rng: Some(rng),
            bn_batch_stats: Vec::new(),
        }
    }

    pub fn eval() -> Self {
        ForwardCtx {
            training: false,
            rng: None,
            bn_batch_stats: Vec::new(),
        }
    }

    /// Inverted dropout: identity at eval time.
    pub fn dropout(&mut self, tape: &mut Tape, x: NodeId, rate: f64) -> NodeId {
        if !self.training || rate <= 0.0 {
            return x;
        }
        let rng = self.rng.as_mut().expect("training mode requires an rng");
        let keep = 1.0 - rate;
        let shape = tape.value(x).shape().to_vec();
        let len = shape.iter().product();
        let mask: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let m = tape.constant(Tensor::new(shape, mask));
        tape.mul(x, m)
    }
}

/// Output node handles of a forward pass.
pub struct ForwardNodes {
    pub logits: NodeId,
    pub features: NodeId,
    pub activations: Vec<(String, NodeId)>,
}

/// Materialized forward outputs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Tensor,
    pub features: Tensor,
    pub activations: Vec<(String, Tensor)>,
}

/// He initialization for a linear layer feeding a ReLU.
pub fn he_init(rng: &mut SeededRng, fan_in: usize, fan_out: usize) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    Tensor::new(
        vec![fan_in, fan_out],
        normal_vec(rng, fan_in * fan_out)
            .into_iter()
            .map(|v| v * std)
            .collect(),
    )
}

/// Xavier initialization for linear layers without a following ReLU.
pub fn xavier_init(rng: &mut SeededRng, fan_in: usize, fan_out: usize) -> Tensor {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::new(
        vec![fan_in, fan_out],
        normal_vec(rng, fan_in * fan_out)
            .into_iter()
            .map(|v| v * std)
            .collect(),
    )
}

pub fn normal_init(rng: &mut SeededRng, shape: &[usize], std: f64) -> Tensor {
    Tensor::new(
        shape.to_vec(),
        normal_vec(rng, shape.iter().product())
            .into_iter()
            .map(|v| v * std)
            .collect(),
    )
}
