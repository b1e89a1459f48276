use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::rmse;
use super::split::CvPlan;
use super::{EvalError, Result};
use crate::numerics::{select_rows, RidgePath};

/// 25 log-spaced values from 1e-3 to 1e3.
pub fn default_grid() -> Vec<f64> {
    (0..25).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 24.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    /// Validation RMSE averaged over every repeat and fold.
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub lambda: f64,
    /// Empty when the grid had a single value and no CV was run.
    pub cv_curve: Vec<CvPoint>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    match grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        Some(&l) => Err(EvalError::BadLambda(l)),
        None => Ok(()),
    }
}

/// Picks the grid value with the lowest mean validation RMSE over all
/// repeats and folds of `plan`. Ties go to the larger lambda.
///
/// Each fold refits standardization on its own training rows. Cells run in
/// parallel; the per-lambda averages are summed in cell order so the result
/// does not depend on scheduling.
pub fn tune_lambda(x: &DMatrix<f64>, y: &[f64], grid: &[f64], plan: &CvPlan) -> Result<Tuning> {
    check_grid(grid)?;
    if x.nrows() != y.len() || plan.n() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: x.nrows(),
            right: if plan.n() != y.len() { plan.n() } else { y.len() },
        });
    }
    if grid.len() == 1 {
        return Ok(Tuning {
            lambda: grid[0],
            cv_curve: Vec::new(),
        });
    }

    let cells: Vec<(usize, usize)> = (0..plan.repeats)
        .flat_map(|r| (0..plan.k).map(move |f| (r, f)))
        .collect();
    let per_cell: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(repeat, fold)| {
            let (train, val) = plan.fold(repeat, fold);
            if train.len() < 2 || val.is_empty() {
                return Err(EvalError::FoldTooSmall {
                    repeat,
                    fold,
                    rows: train.len(),
                });
            }
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let yv: Vec<f64> = val.iter().map(|&i| y[i]).collect();
            let path = RidgePath::new(&select_rows(x, &train), &yt)?;
            let xv = select_rows(x, &val);
            grid.iter()
                .map(|&lambda| {
                    let pred = path.model(lambda)?.predict(&xv)?;
                    rmse(&yv, &pred)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let count = per_cell.len() as f64;
    let cv_curve: Vec<CvPoint> = grid
        .iter()
        .enumerate()
        .map(|(j, &lambda)| CvPoint {
            lambda,
            rmse: per_cell.iter().map(|c| c[j]).sum::<f64>() / count,
        })
        .collect();
    let best = cv_curve
        .iter()
        .copied()
        .reduce(|best, p| {
            if p.rmse < best.rmse || (p.rmse == best.rmse && p.lambda > best.lambda) {
                p
            } else {
                best
            }
        })
        .expect("grid is non-empty");
    Ok(Tuning {
        lambda: best.lambda,
        cv_curve,
    })
}
