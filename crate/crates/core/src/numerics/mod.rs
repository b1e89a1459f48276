//! Linear-algebra core: column standardization, PCA with a variance target,
//! and closed-form ridge regression.
//!
//! Matrices are `nalgebra::DMatrix<f64>` with one row per item.

mod pca;
mod ridge;
mod standardize;

pub use pca::PcaModel;
pub use ridge::{RidgeModel, RidgePath};
pub use standardize::StandardizationParams;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("expected {expected} columns, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("design has {rows} rows but outcome has {len} values")]
    LengthMismatch { rows: usize, len: usize },
    #[error("variance target {0} is outside (0, 1]")]
    VarianceTarget(f64),
    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("normal equations are singular at lambda = 0; use lambda > 0")]
    Singular,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("all rows are identical; no variance to decompose")]
    ZeroVariance,
}

pub type Result<T> = std::result::Result<T, NumericsError>;

pub(crate) fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite)
    }
}

/// Symmetric eigendecomposition with eigenpairs sorted by descending
/// eigenvalue (ties keep the solver's index order).
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Row-major construction helper used across the crate.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c])
}

/// Selects a subset of rows, in the given order.
pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |r, c| x[(rows[r], c)])
}
