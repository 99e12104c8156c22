//! The trained classifier facade: encoding, inference, and tape access
//! for gradient-based scorers.

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::encode::{numeric_and_categorical, OneHotEncoder};
use crate::data::schema::Schema;
use crate::data::standardize::Standardizer;
use crate::error::{Error, Result};
use crate::models::common::{ArchitectureConfig, ForwardCtx, ForwardNodes, ForwardPass};
use crate::models::ft_transformer::FtTransformer;
use crate::models::mlp::Mlp;
use crate::models::resnet::Resnet;
use crate::numerics::stats::argmax;
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;

const INFERENCE_CHUNK: usize = 512;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ArchModel {
    Mlp(Mlp),
    Resnet(Resnet),
    Ft(FtTransformer),
}

impl ArchModel {
    pub fn params(&self) -> &[Tensor] {
        match self {
            ArchModel::Mlp(m) => &m.params,
            ArchModel::Resnet(m) => &m.params,
            ArchModel::Ft(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        match self {
            ArchModel::Mlp(m) => &mut m.params,
            ArchModel::Resnet(m) => &mut m.params,
            ArchModel::Ft(m) => &mut m.params,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            ArchModel::Mlp(m) => m.param_names(),
            ArchModel::Resnet(m) => m.param_names(),
            ArchModel::Ft(m) => m.param_names(),
        }
    }

    /// Final linear layer as (weights (h, C), bias (C)).
    pub fn last_linear(&self) -> (&Tensor, &Tensor) {
        match self {
            ArchModel::Mlp(m) => m.last_linear(),
            ArchModel::Resnet(m) => m.last_linear(),
            ArchModel::Ft(m) => m.last_linear(),
        }
    }
}

/// Architecture-specific encoded inputs.
#[derive(Debug, Clone)]
pub enum EncodedInput {
    Dense(Tensor),
    Tokens {
        numeric: Tensor,
        cats: Vec<Vec<usize>>,
    },
}

impl EncodedInput {
    pub fn n_rows(&self) -> usize {
        match self {
            EncodedInput::Dense(t) => t.shape()[0],
            EncodedInput::Tokens { numeric, .. } => numeric.shape()[0],
        }
    }

    pub fn select(&self, rows: &[usize]) -> EncodedInput {
        match self {
            EncodedInput::Dense(t) => EncodedInput::Dense(t.select_rows(rows)),
            EncodedInput::Tokens { numeric, cats } => EncodedInput::Tokens {
                numeric: numeric.select_rows(rows),
                cats: cats
                    .iter()
                    .map(|c| rows.iter().map(|&r| c[r]).collect())
                    .collect(),
            },
        }
    }
}

/// Handles into a recorded forward pass.
pub struct TapeRun {
    pub nodes: ForwardNodes,
    /// The differentiable input leaf when requested: the dense matrix for
    /// MLP/ResNet, the numeric matrix for the transformer.
    pub input_node: Option<NodeId>,
    pub param_ids: Vec<NodeId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub arch: ArchitectureConfig,
    pub model: ArchModel,
    /// Standardizer fitted on the ID training rows this model saw.
    pub standardizer: Standardizer,
    /// Schema of the (standardized) datasets the model accepts.
    pub input_schema: Schema,
    /// One-hot plan for the dense-input architectures.
    pub encoder: Option<OneHotEncoder>,
}

impl TrainedClassifier {
    pub fn n_classes(&self) -> usize {
        self.arch.n_classes
    }

    /// Encode a standardized dataset into this architecture's input form.
    pub fn encode(&self, ds: &Dataset) -> Result<EncodedInput> {
        if ds.schema != self.input_schema {
            if ds.n_features() != self.input_schema.width() {
                return Err(Error::ShapeMismatch {
                    expected: vec![self.input_schema.width()],
                    actual: vec![ds.n_features()],
                });
            }
            return Err(Error::invalid(
                "dataset schema does not match the schema the model was trained on",
            ));
        }
        Ok(match (&self.model, &self.encoder) {
            (ArchModel::Ft(_), _) => {
                let (numeric, cats, _) = numeric_and_categorical(ds);
                EncodedInput::Tokens { numeric, cats }
            }
            (_, Some(enc)) => EncodedInput::Dense(enc.encode(ds)),
            (_, None) => EncodedInput::Dense(ds.features.clone()),
        })
    }

    /// Record a forward pass on the caller's tape. With
    /// `differentiate_input` the input becomes a gradient-carrying leaf.
    pub fn run_on_tape(
        &self,
        tape: &mut Tape,
        input: &EncodedInput,
        differentiate_input: bool,
        ctx: &mut ForwardCtx,
    ) -> TapeRun {
        let param_ids: Vec<NodeId> = self
            .model
            .params()
            .iter()
            .map(|p| {
                if ctx.training {
                    tape.param(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect();
        self.run_with_params(tape, &param_ids, input, differentiate_input, ctx)
    }

    /// Like [`run_on_tape`] but with caller-registered parameter leaves
    /// (used by training, which needs gradient-carrying parameters).
    pub fn run_with_params(
        &self,
        tape: &mut Tape,
        param_ids: &[NodeId],
        input: &EncodedInput,
        differentiate_input: bool,
        ctx: &mut ForwardCtx,
    ) -> TapeRun {
        let (nodes, input_node) = match (&self.model, input) {
            (ArchModel::Mlp(m), EncodedInput::Dense(x)) => {
                let xi = if differentiate_input {
                    tape.param(x.clone())
                } else {
                    tape.constant(x.clone())
                };
                (m.forward(tape, param_ids, xi, ctx), Some(xi))
            }
            (ArchModel::Resnet(m), EncodedInput::Dense(x)) => {
                let xi = if differentiate_input {
                    tape.param(x.clone())
                } else {
                    tape.constant(x.clone())
                };
                (m.forward(tape, param_ids, xi, ctx), Some(xi))
            }
            (ArchModel::Ft(m), EncodedInput::Tokens { numeric, cats }) => {
                let xi = if differentiate_input {
                    tape.param(numeric.clone())
                } else {
                    tape.constant(numeric.clone())
                };
                (m.forward(tape, param_ids, xi, cats, ctx), Some(xi))
            }
            _ => panic!("encoded input does not match architecture"),
        };
        TapeRun {
            nodes,
            input_node: if differentiate_input { input_node } else { None },
            param_ids: param_ids.to_vec(),
        }
    }

    /// Inference on an encoded input: logits, penultimate features, and
    /// named post-nonlinearity activations. Chunked; dropout inactive.
    pub fn forward_encoded(&self, input: &EncodedInput) -> ForwardPass {
        let n = input.n_rows();
        let mut logits_parts = Vec::new();
        let mut feat_parts = Vec::new();
        let mut act_parts: Vec<(String, Vec<Tensor>)> = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + INFERENCE_CHUNK).min(n);
            let rows: Vec<usize> = (start..end).collect();
            let chunk = input.select(&rows);
            let mut tape = Tape::new();
            let mut ctx = ForwardCtx::eval();
            let run = self.run_on_tape(&mut tape, &chunk, false, &mut ctx);
            logits_parts.push(tape.value(run.nodes.logits).clone());
            feat_parts.push(tape.value(run.nodes.features).clone());
            if act_parts.is_empty() {
                for (name, _) in &run.nodes.activations {
                    act_parts.push((name.clone(), Vec::new()));
                }
            }
            for (i, (_, id)) in run.nodes.activations.iter().enumerate() {
                act_parts[i].1.push(tape.value(*id).clone());
            }
            start = end;
        }
        ForwardPass {
            logits: Tensor::vstack(&logits_parts),
            features: Tensor::vstack(&feat_parts),
            activations: act_parts
                .into_iter()
                .map(|(name, parts)| (name, Tensor::vstack(&parts)))
                .collect(),
        }
    }

    /// Encode + forward on a standardized dataset.
    pub fn forward_with_features(&self, ds: &Dataset) -> Result<ForwardPass> {
        Ok(self.forward_encoded(&self.encode(ds)?))
    }

    pub fn predict_classes(&self, input: &EncodedInput) -> Vec<usize> {
        let pass = self.forward_encoded(input);
        (0..pass.logits.shape()[0])
            .map(|i| argmax(pass.logits.row(i)))
            .collect()
    }

    /// Logits recomputed from externally transformed penultimate features
    /// through the stored final linear layer (ReAct, DICE, ASH).
    pub fn logits_from_features(&self, features: &Tensor) -> Tensor {
        let (w, b) = self.model.last_linear();
        let mut logits = features.matmul(w);
        let c = b.len();
        for i in 0..logits.shape()[0] {
            let row = logits.row_mut(i);
            for j in 0..c {
                row[j] += b.data()[j];
            }
        }
        logits
    }
}
