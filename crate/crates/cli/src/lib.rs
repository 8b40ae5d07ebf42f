//! Command-line and HTTP front ends for `ed_predict`.

pub mod cards;
pub mod error;
pub mod serve;

pub use cards::CardStore;
pub use error::CliError;
pub use ed_predict::model::{nomogram_csv, predict_json as predict, record_from_json, PredictRequest, PredictResponse};
