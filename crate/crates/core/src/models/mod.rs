//! Tabular classifiers (MLP, ResNet, feature-tokenizer transformer),
//! their training recipe, checkpoints, and the entropy-map computation.

pub mod checkpoint;
pub mod classifier;
pub mod common;
pub mod entropy;
pub mod ft_transformer;
pub mod mlp;
pub mod resnet;
pub mod train;

pub use checkpoint::{load_classifier, save_classifier};
pub use classifier::{ArchModel, EncodedInput, TapeRun, TrainedClassifier};
pub use common::{ArchKind, ArchitectureConfig, ForwardCtx, ForwardPass, TrainConfig};
pub use entropy::{entropy_map, EntropyCell, GridSpec};
pub use train::{train_classifier, train_multiclass};

#[cfg(test)]
mod tests;
