//! Pipeline orchestration for the discard-prediction benchmark: stage
//! execution, configuration, artifact persistence, and report rendering.

pub mod config;
pub mod manifest;
pub mod report;
pub mod stages;
pub mod svg;

pub use config::{Budgets, PipelineConfig, ShapConfig};
pub use manifest::RunManifest;
pub use stages::{run_stage, Stage};
