use ed_predict::cohort::CohortError;
use ed_predict::pipeline::PipelineError;
use ed_predict::synth::SynthError;
use ed_predict::ModelError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn io(path: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
        CliError::Io { path: path.to_string(), message: e.to_string() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Model(e) => e.kind(),
            CliError::UnknownModel(_) => "UnknownModel",
            CliError::InvalidInput(_) => "InvalidInput",
            CliError::Synth(SynthError::InfeasibleSpec(_)) => "InfeasibleSpec",
            CliError::Synth(SynthError::UnreadableSpec { .. }) => "UnreadableSpec",
            CliError::Synth(SynthError::Model(e)) => e.kind(),
            CliError::Synth(SynthError::Cohort(_)) | CliError::Cohort(_) => "CohortError",
            CliError::Pipeline(_) => "PipelineError",
            CliError::Io { .. } => "IoError",
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Model(e) | CliError::Synth(SynthError::Model(e)) => e.field(),
            _ => None,
        }
    }

    /// 2 for bad input, 1 for a failed run.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Pipeline(_) | CliError::Io { .. } => 1,
            _ => 2,
        }
    }

    /// `{"error": {"kind", "field", "message"}}`, plus `stage` for pipeline failures.
    pub fn to_json(&self) -> Value {
        let mut body = json!({
            "kind": self.kind(),
            "field": self.field(),
            "message": self.to_string(),
        });
        if let CliError::Pipeline(e) = self {
            body["stage"] = json!(e.stage.name());
        }
        json!({ "error": body })
    }
}
