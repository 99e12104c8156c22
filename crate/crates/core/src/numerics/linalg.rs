//! Symmetric eigendecomposition and positive-definite solves, backed by
//! nalgebra. Everything here works on square matrices stored as flat
//! row-major `Tensor`s.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// `vectors` holds the eigenvectors as columns of a d x d tensor.
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Tensor,
}

pub fn symmetric_eigen(mat: &Tensor) -> Result<SymEigen> {
    let d = square_dim(mat)?;
    let m = DMatrix::from_row_slice(d, d, mat.data());
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Tensor::zeros(&[d, d]);
    for (col_out, &col_in) in order.iter().enumerate() {
        for r in 0..d {
            vectors.set2(r, col_out, eig.eigenvectors[(r, col_in)]);
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Fails with an ill-conditioned-stats error when the matrix is not PD.
pub struct CholFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    dim: usize,
}

impl CholFactor {
    pub fn new(mat: &Tensor) -> Result<Self> {
        let d = square_dim(mat)?;
        let m = DMatrix::from_row_slice(d, d, mat.data());
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::IllConditionedStats("matrix is not positive definite".into()))?;
        Ok(CholFactor { chol, dim: d })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.dim);
        let rhs = nalgebra::DVector::from_column_slice(b);
        self.chol.solve(&rhs).as_slice().to_vec()
    }

    /// Quadratic form `v^T A^{-1} v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let x = self.solve(v);
        v.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn log_determinant(&self) -> f64 {
        // |A| = prod diag(L)^2
        let l = self.chol.l_dirty();
        (0..self.dim).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

/// Sample mean of the rows of an (n x d) matrix.
pub fn row_mean(x: &Tensor) -> Vec<f64> {
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    mean
}

/// Biased (divide by n) sample covariance of the rows of an (n x d) matrix.
pub fn sample_covariance(x: &Tensor, mean: &[f64]) -> Tensor {
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let mut cov = Tensor::zeros(&[d, d]);
    for i in 0..n {
        let row = x.row(i);
        for a in 0..d {
            let ca = row[a] - mean[a];
            for b in a..d {
                let v = ca * (row[b] - mean[b]);
                cov.data_mut()[a * d + b] += v;
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov.get2(a, b) / n as f64;
            cov.set2(a, b, v);
            cov.set2(b, a, v);
        }
    }
    cov
}

/// Tikhonov-style regularization: `cov + scale * trace(cov)/d * I`.
pub fn regularize_covariance(cov: &Tensor, scale: f64) -> Tensor {
    let d = cov.shape()[0];
    let trace: f64 = (0..d).map(|i| cov.get2(i, i)).sum();
    let ridge = scale * trace / d as f64;
    let mut out = cov.clone();
    for i in 0..d {
        let v = out.get2(i, i) + ridge;
        out.set2(i, i, v);
    }
    out
}

fn square_dim(mat: &Tensor) -> Result<usize> {
    if mat.ndim() != 2 || mat.shape()[0] != mat.shape()[1] {
        return Err(Error::invalid(format!(
            "expected square matrix, got shape {:?}",
            mat.shape()
        )));
    }
    Ok(mat.shape()[0])
}
