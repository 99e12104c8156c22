//! Per-feature standardization fitted on ID training rows only.

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

const STD_FLOOR: f64 = 1e-8;

/// Mean/std per numeric feature. Categorical columns pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// (feature index, mean, std) for every numeric feature.
    pub stats: Vec<(usize, f64, f64)>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let n = ds.n_rows();
        if n == 0 {
            return Err(Error::invalid("cannot fit standardizer on empty dataset"));
        }
        let mut stats = Vec::new();
        for j in ds.schema.numeric_indices() {
            let mut mean = 0.0;
            for i in 0..n {
                mean += ds.features.get2(i, j);
            }
            mean /= n as f64;
            let mut var = 0.0;
            for i in 0..n {
                let c = ds.features.get2(i, j) - mean;
                var += c * c;
            }
            var /= n as f64;
            stats.push((j, mean, var.sqrt().max(STD_FLOOR)));
        }
        Ok(Standardizer { stats })
    }

    /// Standardized copy: numeric columns mapped to (x - mean) / std.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        let n = out.n_rows();
        for &(j, mean, std) in &self.stats {
            for i in 0..n {
                let v = (out.features.get2(i, j) - mean) / std;
                out.features.set2(i, j, v);
            }
        }
        out
    }
}
