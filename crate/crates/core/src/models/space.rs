//! Hyperparameter space descriptors and per-family search spaces.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ModelFamily;

/// Domain of one named hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamDomain {
    /// Inclusive integer range.
    Int { lo: i64, hi: i64 },
    /// Float range, linear or log-uniform.
    Float { lo: f64, hi: f64, log: bool },
    /// Categorical choices.
    Cat { choices: Vec<String> },
}

/// A sampled hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpValue {
    Int(i64),
    Float(f64),
    Cat(String),
}

impl HpValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            HpValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            HpValue::Float(v) => Some(*v),
            HpValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            HpValue::Cat(s) => Some(s),
            _ => None,
        }
    }
}

/// A full hyperparameter assignment.
pub type HpAssignment = BTreeMap<String, HpValue>;

/// Search space for one model family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParamSpace {
    pub family: ModelFamily,
    pub params: Vec<(String, ParamDomain)>,
}

/// Which bounds to use: the published search ranges or reduced desk-scale
/// ranges that keep a full pipeline run in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceProfile {
    Full,
    Desk,
}

impl ParamDomain {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> HpValue {
        match self {
            ParamDomain::Int { lo, hi } => HpValue::Int(rng.gen_range(*lo..=*hi)),
            ParamDomain::Float { lo, hi, log } => {
                if *log {
                    let v = rng.gen_range(lo.ln()..=hi.ln());
                    HpValue::Float(v.exp().clamp(*lo, *hi))
                } else {
                    HpValue::Float(rng.gen_range(*lo..=*hi))
                }
            }
            ParamDomain::Cat { choices } => {
                HpValue::Cat(choices[rng.gen_range(0..choices.len())].clone())
            }
        }
    }

    pub fn contains(&self, value: &HpValue) -> bool {
        match (self, value) {
            (ParamDomain::Int { lo, hi }, HpValue::Int(v)) => v >= lo && v <= hi,
            (ParamDomain::Float { lo, hi, .. }, HpValue::Float(v)) => v >= lo && v <= hi,
            (ParamDomain::Cat { choices }, HpValue::Cat(s)) => choices.contains(s),
            _ => false,
        }
    }
}

impl HyperParamSpace {
    /// Uniform random sample from every parameter domain.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> HpAssignment {
        self.params
            .iter()
            .map(|(name, dom)| (name.clone(), dom.sample(rng)))
            .collect()
    }

    /// Checks that every declared parameter is present and in-domain.
    pub fn validate(&self, hp: &HpAssignment) -> Result<()> {
        for (name, dom) in &self.params {
            let v = hp
                .get(name)
                .ok_or_else(|| Error::ModelConfig(format!("missing hyperparameter '{name}'")))?;
            if !dom.contains(v) {
                return Err(Error::ModelConfig(format!(
                    "hyperparameter '{name}' value {v:?} outside its domain {dom:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn domain(&self, name: &str) -> Option<&ParamDomain> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    /// The search space of a model family.
    pub fn for_family(family: ModelFamily, profile: SpaceProfile) -> HyperParamSpace {
        use ModelFamily::*;
        use ParamDomain::*;
        let int = |lo: i64, hi: i64| Int { lo, hi };
        let lin = |lo: f64, hi: f64| Float { lo, hi, log: false };
        let logf = |lo: f64, hi: f64| Float { lo, hi, log: true };
        let cat = |choices: &[&str]| Cat {
            choices: choices.iter().map(|s| s.to_string()).collect(),
        };
        let full = profile == SpaceProfile::Full;
        let params: Vec<(&str, ParamDomain)> = match family {
            DecisionTree => vec![
                ("max_depth", if full { int(1, 49) } else { int(1, 16) }),
                ("min_samples_leaf", int(1, 20)),
                ("min_samples_split", int(2, 20)),
                ("max_features", cat(&["sqrt", "all"])),
            ],
            LogisticRegression => vec![
                ("C", logf(0.01497, 97.24803)),
                ("l1_ratio", lin(0.00505, 0.99963)),
            ],
            RandomForest => vec![
                ("max_depth", if full { int(1, 50) } else { int(2, 10) }),
                ("min_samples_leaf", int(1, 20)),
                ("min_samples_split", int(2, 20)),
                (
                    "n_estimators",
                    if full { int(10, 500) } else { int(10, 24) },
                ),
            ],
            GradientBoosting => vec![
                ("colsample_bytree", lin(0.75021, 0.99825)),
                (
                    "early_stopping_rounds",
                    if full { int(5, 100) } else { int(4, 8) },
                ),
                (
                    "learning_rate",
                    if full {
                        logf(0.00108, 0.09703)
                    } else {
                        logf(0.05, 0.3)
                    },
                ),
                ("max_depth", if full { int(2, 15) } else { int(2, 4) }),
                ("min_child_weight", int(1, 20)),
                (
                    "n_estimators",
                    if full { int(100, 1500) } else { int(15, 40) },
                ),
                ("reg_alpha", logf(0.00103, 19.89581)),
                ("reg_lambda", logf(0.00102, 22.85764)),
                ("subsample", lin(0.75181, 0.99973)),
            ],
            Mlp => vec![
                ("batchnorm", cat(&["false", "true"])),
                ("dropout", lin(0.0, 0.5)),
                (
                    "hidden_dim",
                    if full { int(100, 1500) } else { int(16, 64) },
                ),
                (
                    "init_lr",
                    if full {
                        logf(1e-4, 0.09)
                    } else {
                        logf(3e-3, 0.08)
                    },
                ),
                ("n_layer", if full { int(2, 15) } else { int(1, 1) }),
                ("weight_decay", logf(1e-10, 1e-6)),
            ],
            Ensemble => vec![],
        };
        HyperParamSpace {
            family,
            params: params
                .into_iter()
                .map(|(n, d)| (n.to_string(), d))
                .collect(),
        }
    }
}

/// The selected (best) configurations of the reference study.
pub fn tuned_config(family: ModelFamily) -> HpAssignment {
    use HpValue::*;
    let pairs: Vec<(&str, HpValue)> = match family {
        ModelFamily::DecisionTree => vec![
            ("max_depth", Int(7)),
            ("max_features", Cat("sqrt".into())),
            ("min_samples_leaf", Int(18)),
            ("min_samples_split", Int(15)),
        ],
        ModelFamily::LogisticRegression => {
            vec![("C", Float(0.07085)), ("l1_ratio", Float(0.88392))]
        }
        // The published RF table repeats the tree parameters and omits the
        // estimator count; the median of its search range stands in.
        ModelFamily::RandomForest => vec![
            ("max_depth", Int(7)),
            ("min_samples_leaf", Int(18)),
            ("min_samples_split", Int(15)),
            ("n_estimators", Int(446)),
        ],
        ModelFamily::GradientBoosting => vec![
            ("colsample_bytree", Float(0.80955)),
            ("early_stopping_rounds", Int(75)),
            ("learning_rate", Float(0.01551)),
            ("max_depth", Int(3)),
            ("min_child_weight", Int(4)),
            ("n_estimators", Int(1300)),
            ("reg_alpha", Float(0.01442)),
            ("reg_lambda", Float(2.4627)),
            ("subsample", Float(0.99142)),
        ],
        ModelFamily::Mlp => vec![
            ("batchnorm", Cat("true".into())),
            ("dropout", Float(0.35)),
            ("hidden_dim", Int(1121)),
            ("init_lr", Float(0.00012)),
            ("n_layer", Int(3)),
            ("weight_decay", Float(1e-10)),
        ],
        ModelFamily::Ensemble => vec![],
    };
    pairs.into_iter().map(|(n, v)| (n.to_string(), v)).collect()
}
