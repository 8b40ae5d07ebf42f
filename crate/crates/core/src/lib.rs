//! Erectile dysfunction risk prediction after localized prostate cancer
//! treatment.
//!
//! The crate ships the published 12- and 24-month logistic models as model
//! cards and the pipeline used to develop such models: cohort ingestion and
//! preprocessing, a hospital-disjoint train/test split, univariate screening,
//! bootstrapped logistic regression with recursive feature elimination,
//! discrimination and calibration metrics, and nomograms. A seeded synthetic
//! cohort generator closes the loop for end-to-end checks.

pub mod cohort;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;
pub mod trainer;

pub use model::{ModelCard, ModelError, PatientRecord, Prediction, Variable};
