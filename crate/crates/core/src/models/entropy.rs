//! Softmax-entropy maps over a 2-D input grid, for visualizing model
//! confidence far from the training data.

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::classifier::TrainedClassifier;
use crate::numerics::stats::{entropy, softmax};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub resolution: usize,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, resolution: usize) -> Self {
        GridSpec {
            x_min: lo,
            x_max: hi,
            y_min: lo,
            y_max: hi,
            resolution,
        }
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy)]
pub struct EntropyCell {
    pub x: f64,
    pub y: f64,
    pub entropy: f64,
}

/// Entropy of the model's softmax output over every point of the grid.
/// Grid coordinates are in raw input space; the model's stored
/// standardizer is applied before the forward pass.
pub fn entropy_map(model: &TrainedClassifier, grid: &GridSpec) -> Result<Vec<EntropyCell>> {
    if model.input_schema.width() != 2 {
        return Err(Error::invalid(format!(
            "entropy map needs a 2-feature model, this one takes {}",
            model.input_schema.width()
        )));
    }
    if grid.resolution < 2 {
        return Err(Error::invalid("grid resolution must be at least 2"));
    }
    if ![grid.x_min, grid.x_max, grid.y_min, grid.y_max]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::invalid("grid bounds must be finite"));
    }
    let r = grid.resolution;
    let mut coords = Vec::with_capacity(r * r);
    let mut data = Vec::with_capacity(r * r * 2);
    for xi in 0..r {
        let x = grid.x_min + (grid.x_max - grid.x_min) * xi as f64 / (r - 1) as f64;
        for yi in 0..r {
            let y = grid.y_min + (grid.y_max - grid.y_min) * yi as f64 / (r - 1) as f64;
            coords.push((x, y));
            data.push(x);
            data.push(y);
        }
    }
    let points = Dataset::new(
        model.input_schema.clone(),
        Tensor::new(vec![r * r, 2], data),
        vec![0; r * r],
    )?;
    let standardized = model.standardizer.apply(&points);
    let pass = model.forward_with_features(&standardized)?;
    let mut cells = Vec::with_capacity(r * r);
    for (i, &(x, y)) in coords.iter().enumerate() {
        let probs = softmax(pass.logits.row(i))?;
        cells.push(EntropyCell {
            x,
            y,
            entropy: entropy(&probs),
        });
    }
    Ok(cells)
}
