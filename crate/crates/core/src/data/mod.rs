//! Dataset tooling: schemas, ingestion, windowed time-series aggregation,
//! standardization, ID/OOD split construction, and synthetic generators.

pub mod aggregate;
pub mod dataset;
pub mod encode;
pub mod ingest;
pub mod schema;
pub mod splits;
pub mod standardize;
pub mod synthetic;

pub use dataset::{Dataset, SplitColumn};
pub use encode::OneHotEncoder;
pub use schema::{FeatureDescriptor, FeatureKind, Provenance, Schema, Statistic, Window};
pub use splits::{far_ood_align, near_ood_split, synthesize_ood, Predicate};
pub use standardize::Standardizer;
pub use synthetic::{make_blobs, make_imbalanced_blobs, make_toy2d_multiclass};
