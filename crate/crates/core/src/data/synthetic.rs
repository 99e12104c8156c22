//! Seeded synthetic dataset generators for tests and desk-scale runs.

use crate::data::dataset::{Dataset, SplitColumn};
use crate::data::schema::{FeatureDescriptor, Schema};
use crate::error::Result;
use crate::numerics::tensor::Tensor;
use crate::rng::{normal_vec, rng_from_seed};

fn numeric_schema(d: usize) -> Schema {
    Schema::new((0..d).map(|j| FeatureDescriptor::numeric(format!("f{j}"))).collect()).unwrap()
}

/// Two Gaussian blobs separated by `separation` along the diagonal
/// direction, balanced classes. A raw copy of feature 0 is retained as the
/// split column "f0_raw" so near-OOD predicates survive standardization.
pub fn make_blobs(n: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    make_imbalanced_blobs(n, d, separation, 0.5, seed)
}

/// Gaussian blobs with a configurable positive rate (e.g. mortality-style
/// imbalance). Class 1 has mean shifted by `separation / sqrt(d)` per
/// coordinate so the between-center distance equals `separation`.
pub fn make_imbalanced_blobs(
    n: usize,
    d: usize,
    separation: f64,
    positive_rate: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let n_pos = ((n as f64) * positive_rate).round() as usize;
    let shift = separation / (d as f64).sqrt();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i < n_pos);
        let mut row = normal_vec(&mut rng, d);
        if label == 1 {
            for v in row.iter_mut() {
                *v += shift;
            }
        }
        data.extend_from_slice(&row);
        labels.push(label);
    }
    let features = Tensor::new(vec![n, d], data);
    let f0: Vec<f64> = (0..n).map(|i| features.get2(i, 0)).collect();
    Dataset::new(numeric_schema(d), features, labels)?
        .with_split_column("f0_raw", SplitColumn::Numeric(f0))
}

/// Multi-class 2-D toy task: `classes` Gaussian clusters spaced evenly on
/// a circle of radius 4, one cluster per class, std 0.6. Class labels are
/// folded to {0,1} parity for the binary-label invariant; the full class
/// index is retained in the split column "cluster" and returned separately
/// by [`make_toy2d_multiclass`] for multi-class training.
pub fn make_toy2d(n: usize, classes: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    make_toy2d_multiclass(n, classes, seed)
}

pub fn make_toy2d_multiclass(
    n: usize,
    classes: usize,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    let mut rng = rng_from_seed(seed);
    let radius = 4.0;
    let std = 0.6;
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    let mut class_ids = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let angle = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
        let noise = normal_vec(&mut rng, 2);
        data.push(radius * angle.cos() + std * noise[0]);
        data.push(radius * angle.sin() + std * noise[1]);
        labels.push((c % 2) as u8);
        class_ids.push(c);
    }
    let ds = Dataset::new(numeric_schema(2), Tensor::new(vec![n, 2], data), labels)?
        .with_split_column(
            "cluster",
            SplitColumn::Numeric(class_ids.iter().map(|&c| c as f64).collect()),
        )?;
    Ok((ds, class_ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = make_blobs(100, 5, 3.0, 9).unwrap();
        let b = make_blobs(100, 5, 3.0, 9).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn positive_rate_respected() {
        let ds = make_imbalanced_blobs(1000, 4, 5.0, 0.1, 3).unwrap();
        let pos = ds.labels.iter().filter(|&&l| l == 1).count();
        assert_eq!(pos, 100);
    }

    #[test]
    fn separation_moves_class_means_apart() {
        let ds = make_blobs(4000, 6, 10.0, 1).unwrap();
        let mut mean = [0.0f64; 2];
        let mut count = [0usize; 2];
        for i in 0..ds.n_rows() {
            let l = ds.labels[i] as usize;
            mean[l] += ds.features.get2(i, 0);
            count[l] += 1;
        }
        let gap = (mean[1] / count[1] as f64 - mean[0] / count[0] as f64).abs();
        assert!(gap > 3.0, "per-coordinate gap {gap}");
    }

    #[test]
    fn toy2d_clusters_lie_on_circle() {
        let (ds, classes) = make_toy2d(300, 3, 7).unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(classes.len(), 300);
        assert!(classes.iter().all(|&c| c < 3));
        // cluster centroids sit near radius 4
        for c in 0..3 {
            let rows: Vec<usize> = (0..300).filter(|&i| classes[i] == c).collect();
            let (mut mx, mut my) = (0.0, 0.0);
            for &r in &rows {
                mx += ds.features.get2(r, 0);
                my += ds.features.get2(r, 1);
            }
            mx /= rows.len() as f64;
            my /= rows.len() as f64;
            let r = (mx * mx + my * my).sqrt();
            assert!((r - 4.0).abs() < 0.5, "centroid radius {r}");
        }
    }
}
