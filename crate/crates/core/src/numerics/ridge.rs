use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sorted_eigen, NumericsError, Result, StandardizationParams};

/// Eigenvalues below this fraction of the largest are treated as zero when
/// deciding whether the unpenalized system is singular.
const SINGULAR_RTOL: f64 = 1e-12;

/// Ridge regression on standardized predictors with an unpenalized intercept.
///
/// Minimizes `||y - ybar - Z b||^2 + lambda ||b||^2` where `Z` is the input
/// standardized with the stored parameters, so `coefficients` are in
/// standardized units and `intercept` is the training mean of `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub standardization: StandardizationParams,
}

impl RidgeModel {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let (standardization, z, yc, y_mean) = prepare(x, y)?;
        let (n, p) = z.shape();
        let zty = z.tr_mul(&yc);

        let beta = if p <= n {
            let gram = z.tr_mul(&z);
            if lambda == 0.0 && is_singular(&gram) {
                return Err(NumericsError::Singular);
            }
            let mut a = gram;
            for i in 0..p {
                a[(i, i)] += lambda;
            }
            a.cholesky().ok_or(NumericsError::Singular)?.solve(&zty)
        } else {
            // more predictors than rows: Z^T Z has rank < p, so only lambda > 0
            // has a unique solution, computed through the n x n dual system
            if lambda == 0.0 {
                return Err(NumericsError::Singular);
            }
            let mut k = &z * z.transpose();
            for i in 0..n {
                k[(i, i)] += lambda;
            }
            let alpha = k.cholesky().ok_or(NumericsError::Singular)?.solve(&yc);
            z.tr_mul(&alpha)
        };

        Ok(Self {
            coefficients: beta.iter().copied().collect(),
            intercept: y_mean,
            lambda,
            standardization,
        })
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let z = self.standardization.apply(x)?;
        let beta = DVector::from_column_slice(&self.coefficients);
        Ok((z * beta).iter().map(|v| v + self.intercept).collect())
    }

    /// Coefficients and intercept expressed on the unstandardized inputs.
    /// Constant columns get a zero coefficient.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let s = &self.standardization;
        let coefs: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, b)| if s.constant[j] { 0.0 } else { b / s.sds[j] })
            .collect();
        let shift: f64 = coefs.iter().zip(&s.means).map(|(b, m)| b * m).sum();
        (coefs, self.intercept - shift)
    }

    /// Infinity norm of `(Z^T Z + lambda I) b - Z^T (y - ybar)` on the given
    /// training data, i.e. how well the fitted coefficients satisfy the
    /// normal equations.
    pub fn stationarity_residual(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
        let z = self.standardization.apply(x)?;
        let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - self.intercept));
        let beta = DVector::from_column_slice(&self.coefficients);
        let lhs = z.tr_mul(&(&z * &beta)) + &beta * self.lambda;
        let rhs = z.tr_mul(&yc);
        Ok((lhs - rhs).amax())
    }
}

/// One decomposition of a training design, reusable across a lambda grid.
///
/// Used by cross-validation, where every fold is solved for every grid value:
/// the eigendecomposition of the smaller Gram matrix is computed once and each
/// lambda then costs a diagonal rescale.
#[derive(Debug, Clone)]
pub struct RidgePath {
    standardization: StandardizationParams,
    y_mean: f64,
    eigenvalues: Vec<f64>,
    route: Route,
}

#[derive(Debug, Clone)]
enum Route {
    /// p <= n: Z^T Z = V D V^T, projections V^T Z^T yc
    Primal { v: DMatrix<f64>, proj: DVector<f64> },
    /// p > n: Z Z^T = U D U^T, b = Z^T U (D + lambda)^-1 U^T yc
    Dual {
        zt_u: DMatrix<f64>,
        proj: DVector<f64>,
    },
}

impl RidgePath {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let (standardization, z, yc, y_mean) = prepare(x, y)?;
        let (n, p) = z.shape();
        let (eigenvalues, route) = if p <= n {
            let (vals, v) = sorted_eigen(z.tr_mul(&z));
            let proj = v.tr_mul(&z.tr_mul(&yc));
            (vals, Route::Primal { v, proj })
        } else {
            let (vals, u) = sorted_eigen(&z * z.transpose());
            let proj = u.tr_mul(&yc);
            let zt_u = z.tr_mul(&u);
            (vals, Route::Dual { zt_u, proj })
        };
        Ok(Self {
            standardization,
            y_mean,
            eigenvalues,
            route,
        })
    }

    pub fn coefficients(&self, lambda: f64) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        let max = self.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let (basis, proj) = match &self.route {
            Route::Primal { v, proj } => (v, proj),
            Route::Dual { zt_u, proj } => {
                if lambda == 0.0 {
                    return Err(NumericsError::Singular);
                }
                (zt_u, proj)
            }
        };
        let mut weights = DVector::zeros(proj.len());
        for (i, &d) in self.eigenvalues.iter().enumerate() {
            let d = d.max(0.0);
            if lambda == 0.0 && d <= SINGULAR_RTOL * max {
                return Err(NumericsError::Singular);
            }
            weights[i] = proj[i] / (d + lambda);
        }
        Ok((basis * weights).iter().copied().collect())
    }

    pub fn model(&self, lambda: f64) -> Result<RidgeModel> {
        Ok(RidgeModel {
            coefficients: self.coefficients(lambda)?,
            intercept: self.y_mean,
            lambda,
            standardization: self.standardization.clone(),
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(NumericsError::InvalidLambda(lambda))
    }
}

fn is_singular(gram: &DMatrix<f64>) -> bool {
    let (vals, _) = sorted_eigen(gram.clone());
    let max = vals.first().copied().unwrap_or(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    max <= 0.0 || min <= SINGULAR_RTOL * max
}

type Prepared = (StandardizationParams, DMatrix<f64>, DVector<f64>, f64);

fn prepare(x: &DMatrix<f64>, y: &[f64]) -> Result<Prepared> {
    if x.nrows() != y.len() {
        return Err(NumericsError::LengthMismatch {
            rows: x.nrows(),
            len: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let standardization = StandardizationParams::fit(x)?;
    let z = standardization.apply(x)?;
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    Ok((standardization, z, yc, y_mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixture() -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_row_slice(
            5,
            2,
            &[1.0, 2.0, 2.0, 1.0, 3.0, 4.0, 4.0, 3.0, 5.0, 7.0],
        );
        let y = vec![3.1, 2.9, 7.2, 6.8, 12.1];
        (x, y)
    }

    #[test]
    fn noiseless_recovery() {
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[0.1, 1.0, -2.0, 0.7, -0.3, 0.4, -1.2, 0.8, 1.1, 2.0, 0.0, -0.6, -0.4, 0.5, 0.9],
        );
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v).collect();
        let m = RidgeModel::fit(&x, &y, 0.0).unwrap();
        let (raw, icpt) = m.raw_coefficients();
        assert_abs_diff_eq!(raw[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(raw[1], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(raw[2], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(icpt, 0.0, epsilon = 1e-10);
        let pred = m.predict(&x).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert_abs_diff_eq!(p, t, epsilon = 1e-10);
        }
    }

    #[test]
    fn huge_lambda_gives_mean() {
        let (x, y) = fixture();
        let m = RidgeModel::fit(&x, &y, 1e9).unwrap();
        let mean = y.iter().sum::<f64>() / 5.0;
        for p in m.predict(&x).unwrap() {
            assert_abs_diff_eq!(p, mean, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_row_predicts_intercept() {
        let (x, y) = fixture();
        let m = RidgeModel::fit(&x, &y, 0.5).unwrap();
        let at_mean = DMatrix::from_row_slice(1, 2, &m.standardization.means);
        assert_abs_diff_eq!(m.predict(&at_mean).unwrap()[0], m.intercept, epsilon = 1e-12);
    }

    #[test]
    fn path_matches_direct_fit() {
        let (x, y) = fixture();
        let path = RidgePath::new(&x, &y).unwrap();
        for lambda in [0.0, 0.01, 1.0, 100.0] {
            let direct = RidgeModel::fit(&x, &y, lambda).unwrap();
            let via_path = path.coefficients(lambda).unwrap();
            for (a, b) in direct.coefficients.iter().zip(&via_path) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn wide_design_dual_route() {
        let x = DMatrix::from_fn(4, 7, |r, c| ((r + 1) as f64).powi((c % 3) as i32 + 1) + c as f64 * 0.1 * r as f64);
        let y = vec![1.0, -0.5, 2.0, 0.3];
        assert_eq!(RidgeModel::fit(&x, &y, 0.0), Err(NumericsError::Singular));
        let m = RidgeModel::fit(&x, &y, 0.7).unwrap();
        assert!(m.stationarity_residual(&x, &y).unwrap() < 1e-8);
        let path = RidgePath::new(&x, &y).unwrap();
        assert_eq!(path.coefficients(0.0), Err(NumericsError::Singular));
        for (a, b) in m.coefficients.iter().zip(path.coefficients(0.7).unwrap()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn collinear_columns_singular_at_zero() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let y = vec![1.0, 2.0, 2.5, 4.0];
        assert_eq!(RidgeModel::fit(&x, &y, 0.0), Err(NumericsError::Singular));
        assert!(RidgeModel::fit(&x, &y, 0.1).is_ok());
        // constant column standardizes to zeros, which is also singular
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        assert_eq!(RidgeModel::fit(&c, &[1.0, 2.0, 3.0], 0.0), Err(NumericsError::Singular));
    }

    #[test]
    fn negative_lambda_rejected() {
        let (x, y) = fixture();
        assert_eq!(RidgeModel::fit(&x, &y, -1.0), Err(NumericsError::InvalidLambda(-1.0)));
    }
}
