//! Dense tensor math, reverse-mode autodiff, and the AdamW optimizer.

pub mod adamw;
pub mod gradcheck;
pub mod linalg;
pub mod stats;
pub mod tape;
#[cfg(test)]
mod tape_gradtests;
pub mod tensor;

pub use adamw::{AdamW, AdamWConfig};
pub use stats::{argmax, entropy, logsumexp, softmax};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;
