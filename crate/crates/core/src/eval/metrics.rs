use super::{EvalError, Result};

fn check_pair(y: &[f64], yhat: &[f64], min: usize) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(EvalError::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.len() < min {
        return Err(EvalError::Empty);
    }
    if y.iter().chain(yhat).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn population_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// `sqrt(mean((y - yhat)^2))`.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 1)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Pearson correlation. Errors when either side is constant.
pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 2)?;
    let (my, mh) = (mean(y), mean(yhat));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Predicts the training mean everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanPredictor {
    pub mean: f64,
}

impl MeanPredictor {
    pub fn predict(&self, n: usize) -> Vec<f64> {
        vec![self.mean; n]
    }
}

pub fn baseline_mean(y_train: &[f64]) -> Result<MeanPredictor> {
    if y_train.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(MeanPredictor { mean: mean(y_train) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(rmse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
        assert_eq!(rmse(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn pearson_cases() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let affine: Vec<f64> = y.iter().map(|v| 3.0 * v + 7.0).collect();
        assert_abs_diff_eq!(pearson(&y, &affine).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&y, &neg).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&y, &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8, epsilon = 1e-15);
        assert_eq!(pearson(&y, &[2.0; 4]), Err(EvalError::ConstantInput));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(EvalError::Empty));
    }

    #[test]
    fn baseline() {
        let b = baseline_mean(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(b.predict(2), vec![2.0, 2.0]);
        assert_eq!(baseline_mean(&[]), Err(EvalError::Empty));
    }

    proptest! {
        #[test]
        fn baseline_rmse_is_population_sd(y in prop::collection::vec(-50.0f64..50.0, 1..80)) {
            let b = baseline_mean(&y).unwrap();
            let r = rmse(&y, &b.predict(y.len())).unwrap();
            prop_assert!((r - population_sd(&y)).abs() < 1e-10);
        }

        #[test]
        fn pearson_affine_sign(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -10.0f64..10.0,
        ) {
            let (y, h): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(population_sd(&y) > 1e-3 && population_sd(&h) > 1e-3);
            let r = pearson(&y, &h).unwrap();
            let scaled: Vec<f64> = h.iter().map(|v| a * v + b).collect();
            let r2 = pearson(&y, &scaled).unwrap();
            prop_assert!((r2 - a.signum() * r).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }
}
