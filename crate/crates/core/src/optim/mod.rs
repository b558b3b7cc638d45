//! Evolutionary per-model feature selection and TPE hyperparameter
//! optimization, with a reproducible append-only trial ledger.

pub mod cv;
pub mod ledger;
pub mod nsga2;
pub mod subset;
pub mod tpe;

pub use cv::{cross_validate, stratified_folds};
pub use ledger::{TrialKind, TrialLedger, TrialRecord};
pub use nsga2::{nsga2_feature_search, Nsga2Config, SearchOutcome};
pub use subset::{
    FamilySubsetObjective, FastLinearObjective, SubsetLoss, SubsetObjective, DEFAULT_LAMBDA,
};
pub use tpe::{tpe_optimize, TpeConfig, TpeEval, TpeOutcome};
