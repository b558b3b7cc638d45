//! Categorical variable encoding: one-hot with a rare-level rule for
//! ICD-coded variables, plain 0/1 for binary variables, and an optional
//! missing indicator for missing-as-category variables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Train-fitted encoder for one categorical variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CategoricalEncoder {
    /// Two train levels mapped to 0/1 (lexicographically smaller level = 0).
    Binary {
        zero_level: String,
        one_level: String,
    },
    /// One indicator per retained level, optionally a missing indicator.
    OneHot {
        levels: Vec<String>,
        missing_indicator: bool,
    },
}

/// Fits an encoder on train-observed level counts.
///
/// `rare_threshold` applies to ICD-coded variables: levels seen in fewer
/// than that fraction of train donors are mapped to missing before encoding.
/// `missing_as_category` adds a dedicated missing indicator.
pub fn fit_categorical_encoder(
    level_counts: &BTreeMap<String, usize>,
    n_train_donors: usize,
    is_icd: bool,
    rare_threshold: f64,
    missing_as_category: bool,
) -> CategoricalEncoder {
    let mut levels: Vec<String> = if is_icd {
        level_counts
            .iter()
            .filter(|(_, &c)| (c as f64 / n_train_donors as f64) >= rare_threshold)
            .map(|(l, _)| l.clone())
            .collect()
    } else {
        level_counts.keys().cloned().collect()
    };
    levels.sort();
    if levels.len() == 2 && !missing_as_category {
        CategoricalEncoder::Binary {
            zero_level: levels[0].clone(),
            one_level: levels[1].clone(),
        }
    } else {
        CategoricalEncoder::OneHot {
            levels,
            missing_indicator: missing_as_category,
        }
    }
}

impl CategoricalEncoder {
    /// Feature names produced by this encoder for the named variable.
    pub fn feature_names(&self, var_name: &str) -> Vec<String> {
        match self {
            CategoricalEncoder::Binary { .. } => vec![var_name.to_string()],
            CategoricalEncoder::OneHot {
                levels,
                missing_indicator,
            } => {
                let mut names: Vec<String> =
                    levels.iter().map(|l| format!("{var_name}={l}")).collect();
                if *missing_indicator {
                    names.push(format!("{var_name}=missing"));
                }
                names
            }
        }
    }

    /// Encodes one observed value (or missing). For one-hot encoders an
    /// unseen test level yields all-zero indicators. Binary encoders return
    /// `None` (a missing cell) for missing or unseen values, deferring to
    /// the imputation plan.
    pub fn encode(&self, value: Option<&str>) -> Vec<Option<f64>> {
        match self {
            CategoricalEncoder::Binary {
                zero_level,
                one_level,
            } => {
                let v = match value {
                    Some(s) if s == zero_level => Some(0.0),
                    Some(s) if s == one_level => Some(1.0),
                    _ => None,
                };
                vec![v]
            }
            CategoricalEncoder::OneHot {
                levels,
                missing_indicator,
            } => {
                let mut out: Vec<Option<f64>> = Vec::with_capacity(levels.len() + 1);
                match value {
                    Some(s) => {
                        for l in levels {
                            out.push(Some(if l == s { 1.0 } else { 0.0 }));
                        }
                        if *missing_indicator {
                            out.push(Some(0.0));
                        }
                    }
                    None => {
                        for _ in levels {
                            out.push(Some(0.0));
                        }
                        if *missing_indicator {
                            out.push(Some(1.0));
                        }
                    }
                }
                out
            }
        }
    }
}
