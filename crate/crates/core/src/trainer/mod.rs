//! Logistic regression by IRLS, bootstrapped recursive feature elimination,
//! discrimination metrics and calibration.

mod evaluate;
mod logistic;
mod rfe;

pub use evaluate::{
    calibrate_in_the_large, calibrate_offset, calibration_curve, confusion_at,
    evaluate_predictions, roc_auc, CalibrationBin, Confusion, EvalReport, RocCurve,
    DEFAULT_THRESHOLD,
};
pub use logistic::{
    fit_logistic, log_likelihood, score, with_intercept, FitConfig, FitResult, SEPARATION_LIMIT,
};
pub use rfe::{bootstrap_rfe, replicate_rng, FeatureMatrix, RfeResult, MAX_SKIPPED_FRACTION};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("information matrix is not positive definite")]
    RankDeficientDesign,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("{0} did not converge")]
    NonConvergence(String),
    #[error("{skipped} of {total} bootstrap replicates failed")]
    TooManySkipped { skipped: usize, total: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
