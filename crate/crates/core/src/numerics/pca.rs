use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_finite, sorted_eigen, NumericsError, Result};

/// Cumulative ratios within this distance below the target still count as
/// reaching it, so a target of 1.0 stops at the numerical rank.
const TARGET_SLACK: f64 = 1e-12;

/// Principal components fitted on centered data.
///
/// `components[i]` is the i-th unit loading vector (length = input dim), with
/// the sign fixed so that its largest-magnitude loading is positive.
/// `explained_variance_ratio` covers every eigenvalue of the covariance
/// (min(n, p) of them), while only the first `k` components are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub k: usize,
    pub variance_target: f64,
}

impl PcaModel {
    /// Fits on the rows of `x`, keeping the smallest number of components
    /// whose cumulative explained-variance ratio reaches `variance_target`.
    ///
    /// When the data has more columns than rows, the decomposition runs on
    /// the n x n Gram matrix and maps eigenvectors back to loading space.
    pub fn fit(x: &DMatrix<f64>, variance_target: f64) -> Result<Self> {
        if !(variance_target > 0.0 && variance_target <= 1.0) {
            return Err(NumericsError::VarianceTarget(variance_target));
        }
        let (n, p) = x.shape();
        if n < 2 {
            return Err(NumericsError::TooFewRows { needed: 2, got: n });
        }
        check_finite(x)?;

        let mean: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        let denom = (n - 1) as f64;

        let (values, loadings) = if p <= n {
            let cov = xc.tr_mul(&xc) / denom;
            sorted_eigen(cov)
        } else {
            let gram = &xc * xc.transpose() / denom;
            let (values, u) = sorted_eigen(gram);
            // v = Xc^T u / sqrt((n - 1) * lambda); null directions stay zero
            let mut v = DMatrix::zeros(p, values.len());
            for (i, &val) in values.iter().enumerate() {
                if val > 0.0 {
                    let col = xc.tr_mul(&u.column(i)) / (denom * val).sqrt();
                    v.set_column(i, &col);
                }
            }
            (values, v)
        };

        let variances: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = variances.iter().sum();
        if total <= 0.0 {
            return Err(NumericsError::ZeroVariance);
        }
        let ratios: Vec<f64> = variances.iter().map(|v| v / total).collect();

        let mut k = ratios.len();
        let mut cumulative = 0.0;
        for (i, r) in ratios.iter().enumerate() {
            cumulative += r;
            if cumulative >= variance_target - TARGET_SLACK {
                k = i + 1;
                break;
            }
        }

        let components = (0..k)
            .map(|i| {
                let mut c: Vec<f64> = loadings.column(i).iter().copied().collect();
                fix_sign(&mut c);
                c
            })
            .collect();

        Ok(Self {
            mean,
            components,
            explained_variance: variances,
            explained_variance_ratio: ratios,
            k,
            variance_target,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Projects centered rows onto the kept components (n x k).
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(NumericsError::ColumnMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let w = self.component_matrix();
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mean[j]);
        }
        Ok(xc * w)
    }

    /// Maps scores back to input space: mean + scores * W^T.
    pub fn inverse_transform(&self, scores: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if scores.ncols() != self.k {
            return Err(NumericsError::ColumnMismatch {
                expected: self.k,
                got: scores.ncols(),
            });
        }
        let mut out = scores * self.component_matrix().transpose();
        let mean = DVector::from_column_slice(&self.mean).transpose();
        for mut row in out.row_iter_mut() {
            row += &mean;
        }
        Ok(out)
    }

    /// Input dim x k matrix with one component per column.
    pub fn component_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.input_dim(), self.k, |r, c| self.components[c][r])
    }

    pub fn cumulative_ratio(&self, k: usize) -> f64 {
        self.explained_variance_ratio.iter().take(k).sum()
    }
}

fn fix_sign(c: &mut [f64]) {
    let mut best = 0;
    for (i, v) in c.iter().enumerate() {
        if v.abs() > c[best].abs() {
            best = i;
        }
    }
    if c.get(best).is_some_and(|v| *v < 0.0) {
        c.iter_mut().for_each(|v| *v = -*v);
    }
}
