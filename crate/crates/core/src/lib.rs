//! Item difficulty toolkit.
//!
//! Places grade-level item p-values on a common vertical logit scale through a
//! 1PL (Rasch) relationship and predicts the resulting item easiness from
//! respondent context, test-design annotations, passage text metrics and
//! sentence embeddings, using PCA and ridge regression under a repeated
//! cross-validation protocol.
//!
//! The modules mirror the processing stages:
//!
//! * [`bank`] - item/passage data model, parsing and annotation columns
//! * [`scale`] - ability-norm tables and the p-value to easiness transform
//! * [`text`] - native linguistic metrics computed from passage text
//! * [`features`] - the shared feature table, CSV import and assembly
//! * [`embed`] - embedding inputs, the embedding store and service client
//! * [`numerics`] - standardization, PCA and closed-form ridge
//! * [`eval`] - splits, lambda tuning, metrics and the evaluation pipeline
//! * [`runner`] - experiment configs, the feature-set grid and report output
//! * [`synth`] - synthetic item banks with known ground truth

pub mod bank;
pub mod embed;
pub mod eval;
pub mod features;
pub mod numerics;
pub mod runner;
pub mod scale;
pub mod synth;
pub mod text;

mod error;

pub use error::{Error, Result};
