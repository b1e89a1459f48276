//! Evaluation protocol: a seeded train/test split, lambda tuning by repeated
//! k-fold cross-validation, a refit on the full training set, and RMSE and
//! Pearson correlation on both sides of the split.
//!
//! Every transform (PCA, standardization, ridge) is fit on training rows
//! only. [`FittedPipeline`] holds all of them and serializes to JSON, so
//! leakage can be checked by comparing serialized pipelines.

mod metrics;
mod report;
mod split;
mod tune;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::FeatureTable;
use crate::numerics::{select_rows, NumericsError, PcaModel, RidgeModel, StandardizationParams};

pub use metrics::{baseline_mean, mean, pearson, population_sd, rmse, MeanPredictor};
pub use report::{reports_to_csv, reports_to_json, reports_to_markdown, EvalReport, CSV_HEADER};
pub use split::{split, CvConfig, CvPlan, SplitPlan, MIN_ROWS};
pub use tune::{default_grid, tune_lambda, CvPoint, Tuning};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("need at least {min} rows, got {n}")]
    TooFewRows { n: usize, min: usize },
    #[error("train fraction {0} is outside (0, 1)")]
    Fraction(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("not enough values")]
    Empty,
    #[error("correlation is undefined for a constant vector")]
    ConstantInput,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("cannot build {k}-fold x {repeats} cross-validation over {n} rows")]
    Folds { k: usize, repeats: usize, n: usize },
    #[error("fold {fold} of repeat {repeat} leaves {rows} training rows; at least 2 are needed")]
    FoldTooSmall { repeat: usize, fold: usize, rows: usize },
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("lambda grid value {0} is not a finite non-negative number")]
    BadLambda(f64),
    #[error("feature table has no columns")]
    NoFeatures,
    #[error("PCA stage selects no columns (prefix `{0}`)")]
    NoPcaColumns(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Optional PCA on a subset of columns, fit on training rows. The selected
/// columns are replaced by the retained component scores, which are
/// appended after the untouched columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaStage {
    pub variance_target: f64,
    /// Columns whose name starts with this prefix; all columns when absent.
    #[serde(default)]
    pub prefix: Option<String>,
    /// Standardize the selected columns before PCA.
    #[serde(default)]
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split_seed: u64,
    pub train_fraction: f64,
    pub cv: CvConfig,
    pub grid: Vec<f64>,
    pub pca: Option<PcaStage>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            split_seed: 0,
            train_fraction: 0.8,
            cv: CvConfig::default(),
            grid: default_grid(),
            pca: None,
        }
    }
}

/// Identifies a report. Hashed into the fingerprint along with the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportLabel {
    pub name: String,
    /// Human-readable feature set, e.g. `context+test+text`.
    pub feature_set: String,
    /// Heading the row is grouped under in tables.
    pub group: Option<String>,
}

impl ReportLabel {
    pub fn named(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            feature_set: name.clone(),
            name,
            group: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPca {
    /// Input column indices fed to PCA.
    pub columns: Vec<usize>,
    pub standardization: Option<StandardizationParams>,
    pub model: PcaModel,
}

/// Every parameter learned by [`evaluate`]; enough to score new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub format_version: u32,
    pub input_columns: Vec<String>,
    pub pca: Option<FittedPca>,
    pub ridge: RidgeModel,
}

impl FittedPipeline {
    /// The matrix ridge sees: PCA scores replace the PCA columns.
    pub fn design(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_columns.len() {
            return Err(NumericsError::ColumnMismatch {
                expected: self.input_columns.len(),
                got: x.ncols(),
            }
            .into());
        }
        match &self.pca {
            None => Ok(x.clone()),
            Some(p) => apply_pca(p, x),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.ridge.predict(&self.design(x)?)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pipeline serializes")
    }
}

fn apply_pca(p: &FittedPca, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sub = DMatrix::from_fn(x.nrows(), p.columns.len(), |r, c| x[(r, p.columns[c])]);
    let sub = match &p.standardization {
        Some(s) => s.apply(&sub)?,
        None => sub,
    };
    let scores = p.model.transform(&sub)?;
    let keep: Vec<usize> = (0..x.ncols()).filter(|c| !p.columns.contains(c)).collect();
    Ok(DMatrix::from_fn(x.nrows(), keep.len() + scores.ncols(), |r, c| {
        if c < keep.len() {
            x[(r, keep[c])]
        } else {
            scores[(r, c - keep.len())]
        }
    }))
}

/// Hands out training rows and refuses anything else.
struct LeakageGuard<'a> {
    x: &'a DMatrix<f64>,
    is_test: Vec<bool>,
}

impl LeakageGuard<'_> {
    fn fit_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        assert!(
            rows.iter().all(|&r| !self.is_test[r]),
            "leakage guard: a transform was about to be fit on test rows"
        );
        select_rows(self.x, rows)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub pipeline: FittedPipeline,
    pub split: SplitPlan,
}

fn check_outcome(outcome: &[f64], rows: usize) -> Result<()> {
    if outcome.len() != rows {
        return Err(EvalError::LengthMismatch {
            left: rows,
            right: outcome.len(),
        });
    }
    if outcome.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

fn fingerprint(label: &ReportLabel, config: &EvalConfig, features: Option<&FeatureTable>, outcome: &[f64]) -> String {
    let mut h = Sha256::new();
    let header = serde_json::json!({
        "label": label,
        "config": config,
        "columns": features.map(|f| f.column_names()),
    });
    h.update(header.to_string().as_bytes());
    if let Some(f) = features {
        for r in 0..f.nrows() {
            for v in f.row(r) {
                h.update(v.to_le_bytes());
            }
        }
    }
    for v in outcome {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn pick(v: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| v[i]).collect()
}

/// Runs the full protocol for one feature set:
/// split, optional PCA on train, lambda tuning, refit on all of train,
/// then metrics on train and test.
pub fn evaluate(label: &ReportLabel, features: &FeatureTable, outcome: &[f64], config: &EvalConfig) -> Result<Evaluation> {
    check_outcome(outcome, features.nrows())?;
    if features.ncols() == 0 {
        return Err(EvalError::NoFeatures);
    }
    let plan = split(features.nrows(), config.train_fraction, config.split_seed)?;
    let x = features.to_matrix();
    let guard = LeakageGuard {
        x: &x,
        is_test: plan.test_mask(),
    };
    let train = &plan.train_indices;

    let pca = match &config.pca {
        None => None,
        Some(stage) => {
            let columns: Vec<usize> = features
                .column_names()
                .iter()
                .enumerate()
                .filter(|(_, n)| stage.prefix.as_deref().is_none_or(|p| n.starts_with(p)))
                .map(|(i, _)| i)
                .collect();
            if columns.is_empty() {
                return Err(EvalError::NoPcaColumns(stage.prefix.clone().unwrap_or_default()));
            }
            let xt = guard.fit_rows(train);
            let sub = DMatrix::from_fn(xt.nrows(), columns.len(), |r, c| xt[(r, columns[c])]);
            let standardization = if stage.standardize {
                Some(StandardizationParams::fit(&sub)?)
            } else {
                None
            };
            let sub = match &standardization {
                Some(s) => s.apply(&sub)?,
                None => sub,
            };
            let model = PcaModel::fit(&sub, stage.variance_target)?;
            Some(FittedPca {
                columns,
                standardization,
                model,
            })
        }
    };
    let design = match &pca {
        Some(p) => apply_pca(p, &x)?,
        None => x.clone(),
    };
    let design_guard = LeakageGuard {
        x: &design,
        is_test: plan.test_mask(),
    };

    let xt = design_guard.fit_rows(train);
    let yt = pick(outcome, train);
    let cv = CvPlan::new(train.len(), config.cv)?;
    let tuning = tune_lambda(&xt, &yt, &config.grid, &cv)?;
    let ridge = RidgeModel::fit(&xt, &yt, tuning.lambda)?;

    let pipeline = FittedPipeline {
        format_version: 1,
        input_columns: features.column_names().iter().map(|s| s.to_string()).collect(),
        pca,
        ridge,
    };
    let pred = pipeline.ridge.predict(&design)?;
    let ytest = pick(outcome, &plan.test_indices);
    let (ptrain, ptest) = (pick(&pred, train), pick(&pred, &plan.test_indices));

    let report = EvalReport {
        name: label.name.clone(),
        feature_set: label.feature_set.clone(),
        group: label.group.clone(),
        n_train: train.len(),
        n_test: ytest.len(),
        n_features: features.ncols(),
        n_model_features: design.ncols(),
        pca_k: pipeline.pca.as_ref().map(|p| p.model.k),
        lambda: Some(tuning.lambda),
        train_rmse: rmse(&yt, &ptrain)?,
        test_rmse: rmse(&ytest, &ptest)?,
        train_corr: pearson(&yt, &ptrain).ok(),
        test_corr: pearson(&ytest, &ptest).ok(),
        cv_curve: tuning.cv_curve,
        note: None,
        fingerprint: fingerprint(label, config, Some(features), outcome),
    };
    Ok(Evaluation {
        report,
        pipeline,
        split: plan,
    })
}

/// The mean predictor on the same split as [`evaluate`].
pub fn evaluate_baseline(label: &ReportLabel, outcome: &[f64], config: &EvalConfig) -> Result<EvalReport> {
    check_outcome(outcome, outcome.len())?;
    let plan = split(outcome.len(), config.train_fraction, config.split_seed)?;
    let yt = pick(outcome, &plan.train_indices);
    let ytest = pick(outcome, &plan.test_indices);
    let base = baseline_mean(&yt)?;
    Ok(EvalReport {
        name: label.name.clone(),
        feature_set: label.feature_set.clone(),
        group: label.group.clone(),
        n_train: yt.len(),
        n_test: ytest.len(),
        n_features: 0,
        n_model_features: 0,
        pca_k: None,
        lambda: None,
        train_rmse: rmse(&yt, &base.predict(yt.len()))?,
        test_rmse: rmse(&ytest, &base.predict(ytest.len()))?,
        train_corr: None,
        test_corr: None,
        cv_curve: Vec::new(),
        note: None,
        fingerprint: fingerprint(label, config, None, outcome),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single seed.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let m = mean(v);
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean: m, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seeds: Vec<u64>,
    pub reports: Vec<EvalReport>,
    pub test_rmse: MeanSd,
    /// Over the seeds where the correlation was defined.
    pub test_corr: Option<MeanSd>,
}

/// Repeats [`evaluate`] with a different split seed each time.
pub fn evaluate_seeds(
    label: &ReportLabel,
    features: &FeatureTable,
    outcome: &[f64],
    config: &EvalConfig,
    seeds: &[u64],
) -> Result<SeedSummary> {
    if seeds.is_empty() {
        return Err(EvalError::Empty);
    }
    let reports = seeds
        .iter()
        .map(|&s| {
            let cfg = EvalConfig {
                split_seed: s,
                ..config.clone()
            };
            evaluate(label, features, outcome, &cfg).map(|e| e.report)
        })
        .collect::<Result<Vec<_>>>()?;
    let rm: Vec<f64> = reports.iter().map(|r| r.test_rmse).collect();
    let cr: Vec<f64> = reports.iter().filter_map(|r| r.test_corr).collect();
    Ok(SeedSummary {
        seeds: seeds.to_vec(),
        test_rmse: MeanSd::of(&rm).expect("non-empty"),
        test_corr: MeanSd::of(&cr),
        reports,
    })
}
