//! Feature engineering: time-series summarization, medication encoding,
//! categorical encoding, domain transforms, imputation, and pruning,
//! orchestrated by a train-fitted [`FeatureSchema`].

pub mod encoding;
pub mod impute;
pub mod medications;
pub mod prune;
pub mod timeseries;
pub mod transforms;

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dataset::{DonorRecord, LabeledCohort, OutcomeLabel, RawValue};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub use encoding::{fit_categorical_encoder, CategoricalEncoder};
pub use impute::{
    fit_imputation_plan, fit_imputation_plan_with_aux, impute, AuxLookup, ImputationPlan,
    ImputeReport, NoAux, StrategyAssignment, StrategyConfig, StrategySpec, ValueRule,
};
pub use medications::{fit_medication_vocabulary, medication_token, MedicationVocabulary};
pub use prune::{drop_columns, drop_redundant_constant, redundant_constant_columns};
pub use timeseries::{
    classify_variables, extract_timeseries_features, fit_trend, timeseries_feature_names,
    TimeSeriesKind, TrendFit,
};
pub use transforms::{
    fit_transforms, DichotomizeRule, FittedTransforms, TransformConfig, CREATININE_UMOL_TO_MG_DL,
};

/// Full feature-engineering configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineeringConfig {
    /// Medication vocabulary size.
    pub medication_top_k: usize,
    /// Patterns (regex) naming ICD-coded categorical variables.
    pub icd_var_patterns: Vec<String>,
    /// Patterns naming categoricals whose missing values form a category.
    pub missing_as_category_patterns: Vec<String>,
    /// Minimum train-donor frequency for retained ICD levels.
    pub rare_level_threshold: f64,
    /// Raw variables excluded from the feature set (still readable by
    /// transforms and config rules).
    pub exclude_vars: Vec<String>,
    pub transforms: TransformConfig,
    pub strategies: StrategyConfig,
}

impl Default for EngineeringConfig {
    fn default() -> Self {
        EngineeringConfig {
            medication_top_k: 40,
            icd_var_patterns: Vec::new(),
            missing_as_category_patterns: Vec::new(),
            rare_level_threshold: 0.01,
            exclude_vars: Vec::new(),
            transforms: TransformConfig::default(),
            strategies: StrategyConfig::default(),
        }
    }
}

/// How a static variable is handled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum StaticKind {
    Numeric,
    Categorical(CategoricalEncoder),
}

/// Train-fitted feature schema: everything needed to turn donor records
/// into the engineered, imputed, pruned numeric matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub ts_kinds: BTreeMap<String, TimeSeriesKind>,
    pub static_kinds: BTreeMap<String, StaticKind>,
    pub med_vocab: MedicationVocabulary,
    pub transforms: FittedTransforms,
    /// Assembled feature order before imputation renames/pruning.
    pub raw_feature_names: Vec<String>,
    pub plan: ImputationPlan,
    /// Columns removed after imputation (constant or duplicate on train).
    pub dropped: Vec<String>,
    pub config: EngineeringConfig,
}

fn matches_any(patterns: &[Regex], name: &str) -> bool {
    patterns.iter().any(|re| re.is_match(name))
}

fn compile_patterns(patterns: &[String]) -> Result<Vec<Regex>> {
    patterns
        .iter()
        .map(|p| Regex::new(p).map_err(|e| Error::Feature(format!("bad pattern '{p}': {e}"))))
        .collect()
}

/// Auxiliary lookup over a cohort's raw static fields (for config rules).
pub struct CohortAux<'a> {
    by_id: BTreeMap<&'a str, &'a DonorRecord>,
}

impl<'a> CohortAux<'a> {
    pub fn new(cohort: &'a LabeledCohort) -> Self {
        CohortAux {
            by_id: cohort
                .records
                .iter()
                .map(|r| (r.donor_id.as_str(), r))
                .collect(),
        }
    }
}

impl AuxLookup for CohortAux<'_> {
    fn value(&self, donor_id: &str, var: &str) -> Option<String> {
        self.by_id
            .get(donor_id)
            .and_then(|r| r.static_vars.get(var))
            .and_then(|v| v.as_ref())
            .map(|v| match v {
                RawValue::Cat(s) => s.clone(),
                RawValue::Num(n) => n.to_string(),
            })
    }
}

impl FeatureSchema {
    /// Fits the schema on the training donors of a cohort, then imputes the
    /// training matrix to decide the redundant/constant drop list.
    pub fn fit(
        cohort: &LabeledCohort,
        train_ids: &[String],
        config: EngineeringConfig,
    ) -> Result<FeatureSchema> {
        let by_id: BTreeMap<&str, &DonorRecord> = cohort
            .records
            .iter()
            .map(|r| (r.donor_id.as_str(), r))
            .collect();
        let train_records: Vec<&DonorRecord> = train_ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Feature(format!("unknown donor id '{id}'")))
            })
            .collect::<Result<_>>()?;
        if train_records.is_empty() {
            return Err(Error::Feature("empty training cohort".into()));
        }

        let icd_patterns = compile_patterns(&config.icd_var_patterns)?;
        let mac_patterns = compile_patterns(&config.missing_as_category_patterns)?;
        let excluded = &config.exclude_vars;

        let ts_kinds = classify_variables(&train_records)?;
        let med_vocab = fit_medication_vocabulary(&train_records, config.medication_top_k);
        let transforms = fit_transforms(config.transforms.clone(), &train_records);

        // Static variables: numeric pass-through or categorical encoder.
        let mut numeric_seen: BTreeMap<String, bool> = BTreeMap::new();
        let mut level_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for rec in &train_records {
            for (name, value) in &rec.static_vars {
                if excluded.contains(name) {
                    continue;
                }
                match value {
                    Some(RawValue::Num(_)) => {
                        if let Some(false) = numeric_seen.get(name) {
                            return Err(Error::Feature(format!(
                                "static variable '{name}' mixes numeric and categorical values"
                            )));
                        }
                        numeric_seen.insert(name.clone(), true);
                    }
                    Some(RawValue::Cat(level)) => {
                        if let Some(true) = numeric_seen.get(name) {
                            return Err(Error::Feature(format!(
                                "static variable '{name}' mixes numeric and categorical values"
                            )));
                        }
                        numeric_seen.insert(name.clone(), false);
                        *level_counts
                            .entry(name.clone())
                            .or_default()
                            .entry(level.clone())
                            .or_insert(0) += 1;
                    }
                    None => {}
                }
            }
        }
        let n_train = train_records.len();
        let mut static_kinds: BTreeMap<String, StaticKind> = BTreeMap::new();
        for (name, is_num) in &numeric_seen {
            if *is_num {
                static_kinds.insert(name.clone(), StaticKind::Numeric);
            } else {
                let counts = &level_counts[name];
                let enc = fit_categorical_encoder(
                    counts,
                    n_train,
                    matches_any(&icd_patterns, name),
                    config.rare_level_threshold,
                    matches_any(&mac_patterns, name),
                );
                static_kinds.insert(name.clone(), StaticKind::Categorical(enc));
            }
        }

        let mut schema = FeatureSchema {
            ts_kinds,
            static_kinds,
            med_vocab,
            transforms,
            raw_feature_names: Vec::new(),
            plan: ImputationPlan {
                strategies: BTreeMap::new(),
                train_means: BTreeMap::new(),
                iterative_order: Vec::new(),
                iterative_models: Vec::new(),
                central_range_z: config.strategies.central_range_z,
                max_rounds: config.strategies.max_rounds,
                rel_tol: config.strategies.rel_tol,
                seed: config.strategies.seed,
                converged: true,
                rounds_used: 0,
            },
            dropped: Vec::new(),
            config,
        };
        schema.raw_feature_names = schema.assemble_feature_names();

        // Fit the imputation plan on the assembled training matrix.
        let train_raw = schema.assemble(cohort, train_ids)?;
        let aux = CohortAux::new(cohort);
        schema.plan = fit_imputation_plan_with_aux(&train_raw, &schema.config.strategies, &aux)?;
        let (train_imputed, _) = impute(&schema.plan, &train_raw, &aux)?;
        schema.dropped = redundant_constant_columns(&train_imputed);
        Ok(schema)
    }

    /// Feature names in assembly order (pre-imputation).
    fn assemble_feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (name, kind) in &self.static_kinds {
            match kind {
                StaticKind::Numeric => names.push(name.clone()),
                StaticKind::Categorical(enc) => names.extend(enc.feature_names(name)),
            }
        }
        for (var, kind) in &self.ts_kinds {
            names.extend(timeseries_feature_names(var, *kind));
        }
        names.extend(self.med_vocab.feature_names());
        names.extend(self.transforms.feature_names());
        names
    }

    /// Builds the raw (pre-imputation) matrix for the given donors.
    pub fn assemble(&self, cohort: &LabeledCohort, ids: &[String]) -> Result<FeatureMatrix> {
        let by_id: BTreeMap<&str, &DonorRecord> = cohort
            .records
            .iter()
            .map(|r| (r.donor_id.as_str(), r))
            .collect();
        let labels: Vec<u8> = ids
            .iter()
            .map(|id| {
                cohort
                    .label_of(id)
                    .map(|l| (l == OutcomeLabel::Transplanted) as u8)
                    .ok_or_else(|| Error::Feature(format!("unknown donor id '{id}'")))
            })
            .collect::<Result<_>>()?;
        let mut m = FeatureMatrix::new(self.raw_feature_names.clone(), ids.to_vec(), labels);

        for (row, id) in ids.iter().enumerate() {
            let rec = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Feature(format!("unknown donor id '{id}'")))?;
            let mut col = 0usize;
            for (name, kind) in &self.static_kinds {
                match kind {
                    StaticKind::Numeric => {
                        let v = rec
                            .static_vars
                            .get(name)
                            .and_then(|v| v.as_ref())
                            .and_then(|v| v.as_num());
                        if let Some(v) = v {
                            m.set(row, col, v);
                        }
                        col += 1;
                    }
                    StaticKind::Categorical(enc) => {
                        let level = rec
                            .static_vars
                            .get(name)
                            .and_then(|v| v.as_ref())
                            .and_then(|v| v.as_cat());
                        for v in enc.encode(level) {
                            if let Some(v) = v {
                                m.set(row, col, v);
                            }
                            col += 1;
                        }
                    }
                }
            }
            for (var, kind) in &self.ts_kinds {
                let empty = Vec::new();
                let points = rec.timeseries.get(var).unwrap_or(&empty);
                for (_, v) in extract_timeseries_features(var, points, *kind)? {
                    if let Some(v) = v {
                        m.set(row, col, v);
                    }
                    col += 1;
                }
            }
            for v in self.med_vocab.encode(rec) {
                m.set(row, col, v);
                col += 1;
            }
            for (_, v) in self.transforms.apply(rec) {
                if let Some(v) = v {
                    m.set(row, col, v);
                }
                col += 1;
            }
            debug_assert_eq!(col, m.n_cols());
        }
        Ok(m)
    }

    /// Full application: assemble, impute, and prune the matrix for the
    /// given donors. Feature names never leave the train-fitted schema.
    pub fn apply(
        &self,
        cohort: &LabeledCohort,
        ids: &[String],
    ) -> Result<(FeatureMatrix, ImputeReport)> {
        let raw = self.assemble(cohort, ids)?;
        let aux = CohortAux::new(cohort);
        let (imputed, report) = impute(&self.plan, &raw, &aux)?;
        Ok((drop_columns(&imputed, &self.dropped), report))
    }

    /// Names of the final engineered features.
    pub fn output_feature_names(&self) -> Vec<String> {
        let mut names = self.raw_feature_names.clone();
        for (orig, strat) in &self.plan.strategies {
            if matches!(strat, impute::FittedStrategy::MissingnessIndicator) {
                if let Some(pos) = names.iter().position(|n| n == orig) {
                    names[pos] = format!("{orig} missingness");
                }
            }
        }
        names.retain(|n| !self.dropped.contains(n));
        names
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<FeatureSchema> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::KidneyOutcome;

    fn small_cohort() -> LabeledCohort {
        let mut records = Vec::new();
        for i in 0..30 {
            let mut static_vars: BTreeMap<String, Option<RawValue>> = BTreeMap::new();
            static_vars.insert("age".into(), Some(RawValue::Num(40.0 + i as f64)));
            static_vars.insert(
                "blood_group".into(),
                Some(RawValue::Cat(["A", "B", "O"][i % 3].to_string())),
            );
            if i % 4 != 0 {
                static_vars.insert("bmi".into(), Some(RawValue::Num(22.0 + (i % 7) as f64)));
            } else {
                static_vars.insert("bmi".into(), None);
            }
            let ts = vec![
                (0.0, RawValue::Num(80.0 + i as f64)),
                (10.0, RawValue::Num(85.0 + i as f64)),
                (20.0, RawValue::Num(90.0 + 2.0 * i as f64)),
            ];
            let mut timeseries = BTreeMap::new();
            timeseries.insert("creatinine".to_string(), ts);
            records.push(DonorRecord {
                donor_id: format!("d{i:03}"),
                static_vars,
                timeseries,
                medications: if i % 2 == 0 {
                    vec!["Heparin 5000 IE".into()]
                } else {
                    vec!["Insulin 10".into()]
                },
                kidney_outcomes: if i % 5 == 0 {
                    [
                        Some(KidneyOutcome::Discarded),
                        Some(KidneyOutcome::Discarded),
                    ]
                } else {
                    [
                        Some(KidneyOutcome::Transplanted),
                        Some(KidneyOutcome::Discarded),
                    ]
                },
            });
        }
        LabeledCohort::from_records(records).unwrap()
    }

    #[test]
    fn schema_fit_and_apply_round_trip() {
        let cohort = small_cohort();
        let ids: Vec<String> = cohort.records.iter().map(|r| r.donor_id.clone()).collect();
        let train_ids = ids[..24].to_vec();
        let test_ids = ids[24..].to_vec();
        let schema = FeatureSchema::fit(&cohort, &train_ids, EngineeringConfig::default()).unwrap();
        let (train_m, _) = schema.apply(&cohort, &train_ids).unwrap();
        let (test_m, _) = schema.apply(&cohort, &test_ids).unwrap();
        assert_eq!(train_m.missing_count(), 0);
        assert_eq!(test_m.missing_count(), 0);
        // Vocabulary closure: identical schema on both splits.
        assert_eq!(train_m.feature_names, test_m.feature_names);
        assert_eq!(train_m.feature_names, schema.output_feature_names());
        // Trend features present for the dense series.
        assert!(train_m
            .feature_names
            .iter()
            .any(|n| n == "creatinine slope"));
        // Labels: 1 = transplanted.
        assert_eq!(train_m.labels.iter().filter(|&&l| l == 0).count(), 5);
    }

    #[test]
    fn schema_is_deterministic() {
        let cohort = small_cohort();
        let ids: Vec<String> = cohort.records.iter().map(|r| r.donor_id.clone()).collect();
        let a = FeatureSchema::fit(&cohort, &ids, EngineeringConfig::default()).unwrap();
        let b = FeatureSchema::fit(&cohort, &ids, EngineeringConfig::default()).unwrap();
        let (ma, _) = a.apply(&cohort, &ids).unwrap();
        let (mb, _) = b.apply(&cohort, &ids).unwrap();
        assert_eq!(ma.values, mb.values);
        assert_eq!(ma.feature_names, mb.feature_names);
    }
}
