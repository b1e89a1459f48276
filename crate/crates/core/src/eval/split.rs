use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

/// Smallest bank that can be split into train and test and still leave two
/// training rows for standardization.
pub const MIN_ROWS: usize = 5;

/// A seeded train/test partition of `0..n`. Both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SplitPlan {
    pub fn n(&self) -> usize {
        self.train_indices.len() + self.test_indices.len()
    }

    /// `mask[i]` is true for test rows.
    pub fn test_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        for &i in &self.test_indices {
            mask[i] = true;
        }
        mask
    }
}

/// Shuffles `0..n` with a ChaCha8 stream seeded by `seed` and takes the
/// first `round(n * fraction)` rows for training, kept within `[2, n - 1]`.
pub fn split(n: usize, fraction: f64, seed: u64) -> Result<SplitPlan> {
    if n < MIN_ROWS {
        return Err(EvalError::TooFewRows { n, min: MIN_ROWS });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::Fraction(fraction));
    }
    let n_train = ((n as f64 * fraction).round() as usize).clamp(2, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_indices = perm[..n_train].to_vec();
    let mut test_indices = perm[n_train..].to_vec();
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(SplitPlan {
        seed,
        train_indices,
        test_indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    /// Independent fold assignments whose validation errors are averaged.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 5,
            repeats: 5,
            seed: 0,
        }
    }
}

/// Repeated k-fold assignment over `n` training rows (positions `0..n`
/// within the training set, not bank rows).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    /// `assignments[r][i]` is the validation fold of row `i` in repeat `r`.
    pub assignments: Vec<Vec<usize>>,
}

impl CvPlan {
    /// Each repeat shuffles the rows and deals them round-robin into `k`
    /// folds, so fold sizes differ by at most one.
    pub fn new(n: usize, config: CvConfig) -> Result<Self> {
        let CvConfig { k, repeats, seed } = config;
        if k < 2 || repeats == 0 || n < k {
            return Err(EvalError::Folds { k, repeats, n });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let assignments = (0..repeats)
            .map(|_| {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let mut fold = vec![0; n];
                for (pos, &row) in perm.iter().enumerate() {
                    fold[row] = pos % k;
                }
                fold
            })
            .collect();
        Ok(Self {
            k,
            repeats,
            seed,
            assignments,
        })
    }

    pub fn n(&self) -> usize {
        self.assignments.first().map_or(0, Vec::len)
    }

    /// `(training rows, validation rows)` of one cell, both ascending.
    pub fn fold(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let a = &self.assignments[repeat];
        (0..a.len()).partition(|&i| a[i] != fold)
    }
}
