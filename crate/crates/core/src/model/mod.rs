//! Model cards and their evaluation: linear predictor, logistic link,
//! calibration offset and nomogram points.

mod card;
mod nomogram;
mod record;
mod request;

pub use card::{
    logit, sigmoid, ModelCard, Prediction, Term, VariablePoints, OUTCOME_SEMANTICS,
};
pub use nomogram::{
    nomogram, AxisTick, NomogramAxis, NomogramTable, PointScale, TotalPointsRow,
    TOTAL_POINTS_SAMPLES,
};
pub use record::{Coding, Covariates, NStage, PatientRecord, Variable};
pub use request::{nomogram_csv, predict_json, record_from_json, PredictRequest, PredictResponse};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("{variable} = {value} is outside {min}..={max}")]
    OutOfRangeCode { variable: String, value: f64, min: i64, max: i64 },
    #[error("invalid value `{value}` for {field}")]
    InvalidValue { field: String, value: String },
    #[error("calibration offset must be finite, got {0}")]
    NonFiniteDelta(f64),
    #[error("card `{0}` has no term with a nonzero span")]
    DegenerateCard(String),
    #[error("invalid model card: {0}")]
    InvalidCard(String),
}

impl ModelError {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::UnknownVariable(_) => "UnknownVariable",
            ModelError::MissingField(_) => "MissingField",
            ModelError::OutOfRangeCode { .. } => "OutOfRangeCode",
            ModelError::InvalidValue { .. } => "InvalidValue",
            ModelError::NonFiniteDelta(_) => "NonFiniteDelta",
            ModelError::DegenerateCard(_) => "DegenerateCard",
            ModelError::InvalidCard(_) => "InvalidCard",
        }
    }

    /// The field the error is about, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ModelError::UnknownVariable(f) | ModelError::MissingField(f) => Some(f),
            ModelError::OutOfRangeCode { variable, .. } => Some(variable),
            ModelError::InvalidValue { field, .. } => Some(field),
            _ => None,
        }
    }
}
