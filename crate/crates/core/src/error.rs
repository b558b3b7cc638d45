//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by pipeline operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("labeling error: {0}")]
    Label(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("scaling error: {0}")]
    Scale(String),

    #[error("feature error: {0}")]
    Feature(String),

    #[error("classification of variable '{name}' failed: {reason}")]
    VariableClass { name: String, reason: String },

    #[error("imputation plan error: {0}")]
    ImputePlan(String),

    #[error("model configuration error: {0}")]
    ModelConfig(String),

    #[error("search error: {0}")]
    Search(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("explanation error: {0}")]
    Explain(String),

    #[error("synthetic cohort error: {0}")]
    Synth(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
