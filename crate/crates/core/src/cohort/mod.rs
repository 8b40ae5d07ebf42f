//! Cohort ingestion and preprocessing: CSV schema, treatment categories,
//! missing-data policy, outcome binarization, batch-effect screen and the
//! hospital-disjoint train/test split.

mod batch;
mod ingest;
mod missing;
mod split;
mod treatment;

pub use batch::{
    pca_batch_screen, screen_features, BatchCandidate, BatchCandidateResult, BatchScreenReport,
    Pca, VARIANCE_FLOOR,
};
pub use ingest::{
    ingest, ingest_reader, read_cohort, write_cohort_csv, MalformedRow, RawCohort, RawRow,
    COHORT_COLUMNS,
};
pub use missing::{
    apply_missingness_policy, binarize_outcome, missing_count, nearest_rank_percentile,
    OutcomeClass, DEFAULT_VARIABLE_MISSING_THRESHOLD,
};
pub use split::{split_by_sizes, split_hospitals, SplitAssignment, SplitMethod};
pub use treatment::{map_treatment_text, map_treatments, TreatmentMapping, TreatmentOutcome};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PatientRecord, Variable};

/// Outcome time point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u32", try_from = "u32")]
pub enum Horizon {
    OneYear,
    TwoYears,
}

impl Horizon {
    pub fn months(self) -> u32 {
        match self {
            Horizon::OneYear => 12,
            Horizon::TwoYears => 24,
        }
    }

    pub fn from_months(months: u32) -> Result<Horizon, CohortError> {
        match months {
            12 => Ok(Horizon::OneYear),
            24 => Ok(Horizon::TwoYears),
            other => Err(CohortError::InvalidHorizon(other)),
        }
    }

    pub fn outcome(self, record: &PatientRecord) -> Option<u8> {
        match self {
            Horizon::OneYear => record.outcome_1y,
            Horizon::TwoYears => record.outcome_2y,
        }
    }
}

impl From<Horizon> for u32 {
    fn from(h: Horizon) -> u32 {
        h.months()
    }
}

impl TryFrom<u32> for Horizon {
    type Error = CohortError;

    fn try_from(months: u32) -> Result<Self, Self::Error> {
        Horizon::from_months(months)
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} months", self.months())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub patient_id: String,
    pub reason: String,
}

/// Validated patient records for one horizon plus everything excluded on the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub records: Vec<PatientRecord>,
    pub horizon: Horizon,
    pub exclusions: Vec<Exclusion>,
    /// Variables removed by the missing-data policy.
    pub dropped_variables: Vec<Variable>,
}

impl Cohort {
    pub fn new(records: Vec<PatientRecord>, horizon: Horizon) -> Result<Cohort, CohortError> {
        let mut ids = BTreeSet::new();
        for r in &records {
            if !ids.insert(r.patient_id.as_str()) {
                return Err(CohortError::DuplicatePatient(r.patient_id.clone()));
            }
            r.validate()?;
        }
        Ok(Cohort { records, horizon, exclusions: Vec::new(), dropped_variables: Vec::new() })
    }

    /// Patient count per hospital, sorted by hospital id.
    pub fn hospital_sizes(&self) -> Vec<(String, usize)> {
        let mut counts = std::collections::BTreeMap::<&str, usize>::new();
        for r in &self.records {
            *counts.entry(r.hospital_id.as_str()).or_default() += 1;
        }
        counts.into_iter().map(|(h, c)| (h.to_string(), c)).collect()
    }

    /// Variables still available for modeling.
    pub fn active_variables(&self) -> Vec<Variable> {
        Variable::ALL
            .iter()
            .copied()
            .filter(|v| !self.dropped_variables.contains(v))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("cannot read {path}: {message}")]
    UnreadableFile { path: String, message: String },
    #[error("cohort file has no data rows")]
    EmptyFile,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("duplicate patient id `{0}`")]
    DuplicatePatient(String),
    #[error("horizon must be 12 or 24 months, got {0}")]
    InvalidHorizon(u32),
    #[error("outcome answer {0} is outside 1..=5")]
    OutOfRangeAnswer(u8),
    #[error("every patient was excluded")]
    AllPatientsExcluded,
    #[error("need at least two hospitals to split, found {0}")]
    SingleHospital(usize),
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Stat(#[from] crate::stats::StatError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
