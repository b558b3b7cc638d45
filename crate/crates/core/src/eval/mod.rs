//! Model evaluation: discrimination metrics, the seeded retraining harness,
//! and the ANOVA + Tukey HSD statistical comparison.

pub mod anova;
pub mod metrics;
pub mod retrain;
pub mod special;

pub use anova::{anova_oneway, tukey_hsd, AnovaResult, TukeyPair, TukeyTable};
pub use metrics::{auc, confusion, f1, mcc, normed_mcc, ConfusionCounts};
pub use retrain::{seeded_retrain, RetrainData, SeedRunResult};
