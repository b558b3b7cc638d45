//! Six probabilistic binary classifiers behind one interface.
//!
//! The positive class is `transplanted` (label 1). Every family is fitted
//! single-threaded and fully seeded, so identical (data, hyperparameters,
//! seed) reproduce identical predictions bitwise. Fitted models serialize
//! to self-describing JSON blobs and reload without changing a prediction.

pub mod ensemble;
pub mod forest;
pub mod gbt;
pub mod linear;
pub mod mlp;
pub mod space;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub use ensemble::EnsembleModel;
pub use forest::{RandomForestModel, RandomForestParams};
pub use gbt::{GbtModel, GbtParams, SplitMode};
pub use linear::{LogRegModel, LogRegParams};
pub use mlp::{MlpModel, MlpParams};
pub use space::{tuned_config, HpAssignment, HpValue, HyperParamSpace, ParamDomain, SpaceProfile};
pub use tree::{DecisionTreeModel, DecisionTreeParams, MaxFeatures};

/// Model family tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    DecisionTree,
    LogisticRegression,
    RandomForest,
    GradientBoosting,
    Mlp,
    Ensemble,
}

impl ModelFamily {
    /// Short code used in file names and report tables.
    pub fn code(&self) -> &'static str {
        match self {
            ModelFamily::DecisionTree => "DT",
            ModelFamily::LogisticRegression => "LR",
            ModelFamily::RandomForest => "RF",
            ModelFamily::GradientBoosting => "GBT",
            ModelFamily::Mlp => "MLP",
            ModelFamily::Ensemble => "ENS",
        }
    }

    pub fn from_code(code: &str) -> Option<ModelFamily> {
        match code {
            "DT" => Some(ModelFamily::DecisionTree),
            "LR" => Some(ModelFamily::LogisticRegression),
            "RF" => Some(ModelFamily::RandomForest),
            "GBT" => Some(ModelFamily::GradientBoosting),
            "MLP" => Some(ModelFamily::Mlp),
            "ENS" => Some(ModelFamily::Ensemble),
            _ => None,
        }
    }

    /// Families eligible as ensemble bases (single trees excluded).
    pub fn ensemble_eligible(&self) -> bool {
        matches!(
            self,
            ModelFamily::LogisticRegression
                | ModelFamily::RandomForest
                | ModelFamily::GradientBoosting
                | ModelFamily::Mlp
        )
    }

    /// Whether fitting requires a validation split (early stopping).
    pub fn needs_validation(&self) -> bool {
        matches!(self, ModelFamily::GradientBoosting | ModelFamily::Mlp)
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Uniform fit/score contract for all families.
pub trait ProbabilisticClassifier {
    fn family(&self) -> ModelFamily;

    /// Probability of the positive class (transplanted) for one row.
    fn predict_proba(&self, x: &[f64]) -> f64;

    /// Raw decision score used by post-hoc calibration: pre-sigmoid logits
    /// for LR/MLP, the boosting margin for GBT, and a clamped logit of the
    /// leaf probability for DT/RF.
    fn raw_score(&self, x: &[f64]) -> f64;

    /// Class-probability pair `[p(discarded), p(transplanted)]`.
    fn predict_proba_pair(&self, x: &[f64]) -> [f64; 2] {
        let p = self.predict_proba(x);
        [1.0 - p, p]
    }

    /// Predicted label with ties at the threshold resolving to positive.
    fn predict_label(&self, x: &[f64]) -> u8 {
        (self.predict_proba(x) >= 0.5) as u8
    }
}

/// Clamped logit used when a tree-family probability reaches 0 or 1.
pub(crate) fn clamped_logit(p: f64) -> f64 {
    let eps = 1e-6;
    let p = p.clamp(eps, 1.0 - eps);
    (p / (1.0 - p)).ln()
}

/// Any fitted model, serializable as a self-describing blob.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnyModel {
    DecisionTree(DecisionTreeModel),
    LogisticRegression(LogRegModel),
    RandomForest(RandomForestModel),
    GradientBoosting(GbtModel),
    Mlp(MlpModel),
    Ensemble(EnsembleModel),
}

impl ProbabilisticClassifier for AnyModel {
    fn family(&self) -> ModelFamily {
        match self {
            AnyModel::DecisionTree(m) => m.family(),
            AnyModel::LogisticRegression(m) => m.family(),
            AnyModel::RandomForest(m) => m.family(),
            AnyModel::GradientBoosting(m) => m.family(),
            AnyModel::Mlp(m) => m.family(),
            AnyModel::Ensemble(m) => m.family(),
        }
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            AnyModel::DecisionTree(m) => m.predict_proba(x),
            AnyModel::LogisticRegression(m) => m.predict_proba(x),
            AnyModel::RandomForest(m) => m.predict_proba(x),
            AnyModel::GradientBoosting(m) => m.predict_proba(x),
            AnyModel::Mlp(m) => m.predict_proba(x),
            AnyModel::Ensemble(m) => m.predict_proba(x),
        }
    }

    fn raw_score(&self, x: &[f64]) -> f64 {
        match self {
            AnyModel::DecisionTree(m) => m.raw_score(x),
            AnyModel::LogisticRegression(m) => m.raw_score(x),
            AnyModel::RandomForest(m) => m.raw_score(x),
            AnyModel::GradientBoosting(m) => m.raw_score(x),
            AnyModel::Mlp(m) => m.raw_score(x),
            AnyModel::Ensemble(m) => m.raw_score(x),
        }
    }
}

impl AnyModel {
    /// Per-row positive-class probabilities.
    pub fn predict_proba_batch(&self, x: &DenseMatrix) -> Vec<f64> {
        (0..x.n_rows)
            .map(|r| self.predict_proba(x.row(r)))
            .collect()
    }

    pub fn raw_score_batch(&self, x: &DenseMatrix) -> Vec<f64> {
        (0..x.n_rows).map(|r| self.raw_score(x.row(r))).collect()
    }

    /// Names of the features this model was fitted on.
    pub fn feature_names(&self) -> &[String] {
        match self {
            AnyModel::DecisionTree(m) => &m.feature_names,
            AnyModel::LogisticRegression(m) => &m.feature_names,
            AnyModel::RandomForest(m) => &m.feature_names,
            AnyModel::GradientBoosting(m) => &m.feature_names,
            AnyModel::Mlp(m) => &m.feature_names,
            AnyModel::Ensemble(_) => &[],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<AnyModel> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<AnyModel> {
        AnyModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Training-loop knobs held outside the hyperparameter spaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub mlp_max_epochs: usize,
    pub mlp_patience: usize,
    pub mlp_batch_size: usize,
    pub logreg_max_epochs: usize,
    pub logreg_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            mlp_max_epochs: 500,
            mlp_patience: 20,
            mlp_batch_size: 128,
            logreg_max_epochs: 200,
            logreg_tol: 1e-6,
        }
    }
}

/// Fits one family from a hyperparameter assignment. GBT and MLP require a
/// validation split for early stopping.
pub fn fit_family(
    family: ModelFamily,
    hp: &HpAssignment,
    x: &DenseMatrix,
    y: &[u8],
    validation: Option<(&DenseMatrix, &[u8])>,
    seed: u64,
    feature_names: &[String],
) -> Result<AnyModel> {
    fit_family_with(
        family,
        hp,
        x,
        y,
        validation,
        seed,
        feature_names,
        &FitOptions::default(),
    )
}

/// [`fit_family`] with explicit training-loop options.
#[allow(clippy::too_many_arguments)]
pub fn fit_family_with(
    family: ModelFamily,
    hp: &HpAssignment,
    x: &DenseMatrix,
    y: &[u8],
    validation: Option<(&DenseMatrix, &[u8])>,
    seed: u64,
    feature_names: &[String],
    options: &FitOptions,
) -> Result<AnyModel> {
    if family.needs_validation() && validation.is_none() {
        return Err(Error::ModelConfig(format!(
            "{family} requires a validation split for early stopping"
        )));
    }
    let names = feature_names.to_vec();
    match family {
        ModelFamily::DecisionTree => {
            let params = DecisionTreeParams::from_hp(hp)?;
            Ok(AnyModel::DecisionTree(tree::fit_decision_tree(
                x, y, &params, seed, names,
            )?))
        }
        ModelFamily::LogisticRegression => {
            let mut params = LogRegParams::from_hp(hp)?;
            params.max_epochs = options.logreg_max_epochs;
            params.tol = options.logreg_tol;
            Ok(AnyModel::LogisticRegression(linear::fit_logreg_elasticnet(
                x, y, &params, seed, names,
            )?))
        }
        ModelFamily::RandomForest => {
            let params = RandomForestParams::from_hp(hp)?;
            Ok(AnyModel::RandomForest(forest::fit_random_forest(
                x, y, &params, seed, names,
            )?))
        }
        ModelFamily::GradientBoosting => {
            let params = GbtParams::from_hp(hp)?;
            let (xv, yv) = validation.unwrap();
            Ok(AnyModel::GradientBoosting(gbt::fit_gradient_boosting(
                x, y, xv, yv, &params, seed, names,
            )?))
        }
        ModelFamily::Mlp => {
            let mut params = MlpParams::from_hp(hp)?;
            params.max_epochs = options.mlp_max_epochs;
            params.patience = options.mlp_patience;
            params.batch_size = options.mlp_batch_size;
            let (xv, yv) = validation.unwrap();
            Ok(AnyModel::Mlp(mlp::fit_mlp(
                x, y, xv, yv, &params, seed, names,
            )?))
        }
        ModelFamily::Ensemble => Err(Error::ModelConfig(
            "the ensemble is assembled from fitted base models, not fit directly".into(),
        )),
    }
}
