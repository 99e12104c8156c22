//! Out-of-distribution detection on tabular data.
//!
//! The crate provides everything needed to run OOD-detection experiments
//! end to end: a small f64 tensor/autodiff stack, three tabular classifier
//! architectures (MLP, ResNet, feature-tokenizer transformer), post-hoc
//! novelty scorers layered on a trained classifier, density-based scorers
//! of the input marginal, threshold-free metrics (AUROC, FPR@95), and the
//! dataset tooling for near/far/synthesized ID-OOD constructions.
//!
//! Scores follow one convention everywhere: higher means more OOD.

pub mod data;
pub mod density;
pub mod error;
pub mod eval;
pub mod models;
pub mod numerics;
pub mod posthoc;
pub mod rng;

pub use error::{Error, Result};
