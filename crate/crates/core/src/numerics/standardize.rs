use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_finite, NumericsError, Result};

/// Relative threshold under which a column's spread counts as zero.
const CONSTANT_TOL: f64 = 1e-12;

/// Per-column centering and scaling learned from training rows.
///
/// Standard deviations are population (divide by `n`). Columns whose spread
/// is zero are flagged constant; applying the parameters divides them by 1,
/// so training rows of a constant column map to exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl StandardizationParams {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(NumericsError::TooFewRows { needed: 2, got: n });
        }
        check_finite(x)?;
        let nf = n as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut sds = Vec::with_capacity(x.ncols());
        let mut constant = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.iter().sum::<f64>() / nf;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
            let sd = var.sqrt();
            let is_constant = sd <= CONSTANT_TOL * mean.abs().max(1.0);
            means.push(mean);
            sds.push(if is_constant { 0.0 } else { sd });
            constant.push(is_constant);
        }
        Ok(Self {
            means,
            sds,
            constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(NumericsError::ColumnMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let scale = if self.constant[j] { 1.0 } else { self.sds[j] };
            let mean = self.means[j];
            col.apply(|v| *v = (*v - mean) / scale);
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(NumericsError::ColumnMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let scale = if self.constant[j] { 1.0 } else { self.sds[j] };
                (v - self.means[j]) / scale
            })
            .collect())
    }

    pub fn constant_columns(&self) -> Vec<usize> {
        self.constant
            .iter()
            .enumerate()
            .filter_map(|(j, &c)| c.then_some(j))
            .collect()
    }
}
