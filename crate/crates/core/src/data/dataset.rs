//! The dataset currency: feature matrix, binary labels, schema, and any
//! raw split-variable columns retained for ID/OOD predicates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::schema::{FeatureKind, Schema};
use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// A column kept outside the feature matrix for split predicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl SplitColumn {
    pub fn len(&self) -> usize {
        match self {
            SplitColumn::Numeric(v) => v.len(),
            SplitColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> SplitColumn {
        match self {
            SplitColumn::Numeric(v) => {
                SplitColumn::Numeric(rows.iter().map(|&r| v[r]).collect())
            }
            SplitColumn::Categorical(v) => {
                SplitColumn::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Schema,
    /// n x d feature matrix; categorical entries hold category indices.
    pub features: Tensor,
    /// Binary labels (0/1).
    pub labels: Vec<u8>,
    /// Raw split-variable columns, keyed by name. Deterministic order.
    pub split_columns: BTreeMap<String, SplitColumn>,
}

impl Dataset {
    pub fn new(schema: Schema, features: Tensor, labels: Vec<u8>) -> Result<Self> {
        if features.ndim() != 2 {
            return Err(Error::invalid("feature matrix must be 2-D"));
        }
        let (n, d) = (features.shape()[0], features.shape()[1]);
        if d != schema.width() {
            return Err(Error::ShapeMismatch {
                expected: vec![n, schema.width()],
                actual: features.shape().to_vec(),
            });
        }
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "label count {} does not match row count {n}",
                labels.len()
            )));
        }
        if !features.all_finite() {
            return Err(Error::invalid("feature matrix contains non-finite entries"));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::invalid("labels must be binary (0/1)"));
        }
        Ok(Dataset {
            schema,
            features,
            labels,
            split_columns: BTreeMap::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn n_features(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn with_split_column(mut self, name: &str, col: SplitColumn) -> Result<Self> {
        if col.len() != self.n_rows() {
            return Err(Error::invalid(format!(
                "split column {name} has {} rows, dataset has {}",
                col.len(),
                self.n_rows()
            )));
        }
        self.split_columns.insert(name.to_string(), col);
        Ok(self)
    }

    /// New dataset containing only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let d = self.n_features();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(self.features.row(r));
        }
        Dataset {
            schema: self.schema.clone(),
            features: Tensor::new(vec![rows.len(), d], data),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            split_columns: self
                .split_columns
                .iter()
                .map(|(k, v)| (k.clone(), v.select(rows)))
                .collect(),
        }
    }

    /// New dataset with the named feature column removed.
    pub fn drop_feature(&self, name: &str) -> Result<Dataset> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| Error::invalid(format!("no feature named {name}")))?;
        let d = self.n_features();
        let n = self.n_rows();
        let mut data = Vec::with_capacity(n * (d - 1));
        for i in 0..n {
            let row = self.features.row(i);
            data.extend_from_slice(&row[..idx]);
            data.extend_from_slice(&row[idx + 1..]);
        }
        let mut features = self.schema.features.clone();
        features.remove(idx);
        Ok(Dataset {
            schema: Schema::new(features)?,
            features: Tensor::new(vec![n, d - 1], data),
            labels: self.labels.clone(),
            split_columns: self.split_columns.clone(),
        })
    }

    /// Project features onto the given schema indices, in order.
    pub fn project(&self, indices: &[usize], schema: Schema) -> Dataset {
        let n = self.n_rows();
        let mut data = Vec::with_capacity(n * indices.len());
        for i in 0..n {
            let row = self.features.row(i);
            for &j in indices {
                data.push(row[j]);
            }
        }
        Dataset {
            schema,
            features: Tensor::new(vec![n, indices.len()], data),
            labels: self.labels.clone(),
            split_columns: self.split_columns.clone(),
        }
    }

    pub fn classes_present(&self) -> Vec<u8> {
        let mut present = vec![];
        for c in [0u8, 1u8] {
            if self.labels.contains(&c) {
                present.push(c);
            }
        }
        present
    }

    /// Decode a categorical cell to its category string.
    pub fn category_of(&self, row: usize, feature: usize) -> Option<&str> {
        match &self.schema.features[feature].kind {
            FeatureKind::Numeric => None,
            FeatureKind::Categorical { categories } => {
                let idx = self.features.get2(row, feature) as usize;
                categories.get(idx).map(|s| s.as_str())
            }
        }
    }
}
