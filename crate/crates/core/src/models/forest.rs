//! Random forest: bagged CART trees with sqrt feature subsampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

use super::space::HpAssignment;
use super::tree::{fit_decision_tree, DecisionTreeModel, DecisionTreeParams, MaxFeatures};
use super::{clamped_logit, ModelFamily, ProbabilisticClassifier};

const SALT_FOREST: u64 = 0xf057;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Bootstrap resampling per tree; disabling it makes a single-tree
    /// forest collapse to that tree.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
}

fn default_bootstrap() -> bool {
    true
}

impl RandomForestParams {
    pub fn from_hp(hp: &HpAssignment) -> Result<RandomForestParams> {
        let get_int = |name: &str| -> Result<usize> {
            hp.get(name)
                .and_then(|v| v.as_int())
                .map(|v| v as usize)
                .ok_or_else(|| {
                    Error::ModelConfig(format!("missing integer hyperparameter '{name}'"))
                })
        };
        let params = RandomForestParams {
            n_estimators: get_int("n_estimators")?,
            max_depth: get_int("max_depth")?,
            min_samples_leaf: get_int("min_samples_leaf")?,
            min_samples_split: get_int("min_samples_split")?,
            bootstrap: true,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::ModelConfig("n_estimators must be at least 1".into()));
        }
        DecisionTreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: self.min_samples_split,
            max_features: MaxFeatures::Sqrt,
        }
        .validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub params: RandomForestParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
}

/// Fits the forest; every tree draws its own bootstrap sample and RNG
/// stream from the model seed.
pub fn fit_random_forest(
    x: &DenseMatrix,
    y: &[u8],
    params: &RandomForestParams,
    seed: u64,
    feature_names: Vec<String>,
) -> Result<RandomForestModel> {
    params.validate()?;
    if x.n_rows == 0 || x.n_rows != y.len() {
        return Err(Error::ModelConfig(
            "empty or mismatched training data".into(),
        ));
    }
    let tree_params = DecisionTreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        min_samples_split: params.min_samples_split,
        max_features: MaxFeatures::Sqrt,
    };
    let mut trees = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators {
        let tree_seed = rng::derive_seed(seed, SALT_FOREST, t as u64);
        if params.bootstrap {
            let mut boot_rng = rng::stream(seed, SALT_FOREST ^ 0xb007, t as u64);
            let rows: Vec<usize> = (0..x.n_rows)
                .map(|_| boot_rng.gen_range(0..x.n_rows))
                .collect();
            let xb = x.select_rows(&rows);
            let yb: Vec<u8> = rows.iter().map(|&r| y[r]).collect();
            trees.push(fit_decision_tree(
                &xb,
                &yb,
                &tree_params,
                tree_seed,
                Vec::new(),
            )?);
        } else {
            trees.push(fit_decision_tree(
                x,
                y,
                &tree_params,
                tree_seed,
                Vec::new(),
            )?);
        }
    }
    Ok(RandomForestModel {
        trees,
        params: params.clone(),
        seed,
        feature_names,
    })
}

impl ProbabilisticClassifier for RandomForestModel {
    fn family(&self) -> ModelFamily {
        ModelFamily::RandomForest
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(x)).sum();
        sum / self.trees.len() as f64
    }

    fn raw_score(&self, x: &[f64]) -> f64 {
        clamped_logit(self.predict_proba(x))
    }
}
