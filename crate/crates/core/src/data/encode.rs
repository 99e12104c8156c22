//! Model-facing encodings of a dataset.
//!
//! MLP, ResNet, and the density models consume a dense matrix with
//! categorical features one-hot expanded. The feature-tokenizer
//! transformer consumes numeric columns plus raw category indices for its
//! learned embeddings. Both encodings are fixed by the schema, so encoded
//! matrices from train and test always line up.

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::schema::{FeatureKind, Schema};
use crate::numerics::tensor::Tensor;

/// One-hot expansion plan derived from a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    /// Per source feature: width in the encoded matrix (1 for numeric,
    /// #categories for categorical).
    widths: Vec<usize>,
    /// Encoded columns that came from numeric features.
    numeric_out_cols: Vec<usize>,
    out_width: usize,
}

impl OneHotEncoder {
    pub fn from_schema(schema: &Schema) -> Self {
        let mut widths = Vec::with_capacity(schema.width());
        let mut numeric_out_cols = Vec::new();
        let mut cursor = 0;
        for f in &schema.features {
            match &f.kind {
                FeatureKind::Numeric => {
                    widths.push(1);
                    numeric_out_cols.push(cursor);
                    cursor += 1;
                }
                FeatureKind::Categorical { categories } => {
                    widths.push(categories.len());
                    cursor += categories.len();
                }
            }
        }
        OneHotEncoder {
            widths,
            numeric_out_cols,
            out_width: cursor,
        }
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    /// Encoded columns corresponding to numeric source features.
    pub fn numeric_out_cols(&self) -> &[usize] {
        &self.numeric_out_cols
    }

    pub fn encode(&self, ds: &Dataset) -> Tensor {
        let n = ds.n_rows();
        let mut out = vec![0.0; n * self.out_width];
        for i in 0..n {
            let row = ds.features.row(i);
            let mut cursor = 0;
            for (j, &w) in self.widths.iter().enumerate() {
                if w == 1 && ds.schema.features[j].kind.is_numeric() {
                    out[i * self.out_width + cursor] = row[j];
                } else {
                    let code = row[j] as usize;
                    if code < w {
                        out[i * self.out_width + cursor + code] = 1.0;
                    }
                }
                cursor += w;
            }
        }
        Tensor::new(vec![n, self.out_width], out)
    }
}

/// Split a dataset into the numeric matrix and per-feature category codes
/// used by the tokenizer path.
pub fn numeric_and_categorical(ds: &Dataset) -> (Tensor, Vec<Vec<usize>>, Vec<usize>) {
    let n = ds.n_rows();
    let num_idx = ds.schema.numeric_indices();
    let cat_idx = ds.schema.categorical_indices();
    let mut numeric = vec![0.0; n * num_idx.len()];
    for i in 0..n {
        for (k, &j) in num_idx.iter().enumerate() {
            numeric[i * num_idx.len() + k] = ds.features.get2(i, j);
        }
    }
    let mut cats: Vec<Vec<usize>> = Vec::with_capacity(cat_idx.len());
    let mut cards = Vec::with_capacity(cat_idx.len());
    for &j in &cat_idx {
        let card = match &ds.schema.features[j].kind {
            FeatureKind::Categorical { categories } => categories.len(),
            FeatureKind::Numeric => unreachable!(),
        };
        cards.push(card);
        cats.push((0..n).map(|i| ds.features.get2(i, j) as usize).collect());
    }
    (Tensor::new(vec![n, num_idx.len()], numeric), cats, cards)
}
