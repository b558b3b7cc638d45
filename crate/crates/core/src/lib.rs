//! Benchmarking library for donor-kidney discard prediction.
//!
//! The crate covers the full desk-scale pipeline: cohort ingestion and
//! splitting, feature engineering with a multi-strategy imputation plan,
//! six probabilistic classifier families behind one interface, evolutionary
//! per-model feature selection, TPE hyperparameter tuning, seeded retraining
//! with ANOVA/Tukey model comparison, probability calibration, and
//! permutation-based Shapley explainability. A synthetic cohort generator
//! with known ground truth makes every stage verifiable without access to
//! confidential clinical data.

pub mod calibration;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod matrix;
pub mod models;
pub mod optim;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
