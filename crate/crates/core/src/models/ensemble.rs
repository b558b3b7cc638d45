//! Mean-probability ensemble over per-family feature subsets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AnyModel, ModelFamily, ProbabilisticClassifier};

/// One base model together with the indices of its feature subset within
/// the full engineered feature vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub model: AnyModel,
    pub feature_indices: Vec<usize>,
}

/// Mean-probability ensemble; single decision trees are excluded as bases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: Vec<EnsembleMember>,
}

impl EnsembleModel {
    pub fn new(members: Vec<EnsembleMember>) -> Result<EnsembleModel> {
        if members.is_empty() {
            return Err(Error::ModelConfig(
                "ensemble needs at least one base model".into(),
            ));
        }
        for m in &members {
            let family = m.model.family();
            if !family.ensemble_eligible() {
                return Err(Error::ModelConfig(format!(
                    "{family} is not an eligible ensemble base"
                )));
            }
        }
        Ok(EnsembleModel { members })
    }

    fn project(indices: &[usize], x: &[f64]) -> Vec<f64> {
        indices.iter().map(|&i| x[i]).collect()
    }
}

impl ProbabilisticClassifier for EnsembleModel {
    fn family(&self) -> ModelFamily {
        ModelFamily::Ensemble
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        let sum: f64 = self
            .members
            .iter()
            .map(|m| m.model.predict_proba(&Self::project(&m.feature_indices, x)))
            .sum();
        sum / self.members.len() as f64
    }

    /// The ensemble has no common raw-score scale; the clamped logit of the
    /// averaged probability stands in (it is excluded from calibration).
    fn raw_score(&self, x: &[f64]) -> f64 {
        super::clamped_logit(self.predict_proba(x))
    }
}
