//! Domain-specific derived features: diuresis normalization, creatinine
//! unit conversion, diabetes/alcohol history features, and configured
//! dichotomizations.

use serde::{Deserialize, Serialize};

use crate::dataset::DonorRecord;
#[cfg(test)]
use crate::dataset::RawValue;
use crate::features::timeseries::NamedFeatures;

/// Conversion factor from µmol/L to mg/dL for creatinine.
pub const CREATININE_UMOL_TO_MG_DL: f64 = 0.011312;

const DAYS_PER_YEAR: f64 = 365.25;

/// Groups rare categorical levels into a yes/no feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomizeRule {
    pub var: String,
    pub feature_name: String,
    pub positive_levels: Vec<String>,
    pub negative_levels: Vec<String>,
}

/// Names of the raw fields the domain transforms read.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    pub diuresis_last_hour_var: Option<String>,
    pub body_weight_var: Option<String>,
    pub diuresis_total_var: Option<String>,
    pub diuresis_window_hours_var: Option<String>,
    pub creatinine_umol_vars: Vec<String>,
    pub birth_days_var: Option<String>,
    pub diabetes_diagnosis_days_var: Option<String>,
    pub death_days_var: Option<String>,
    pub alcohol_start_days_var: Option<String>,
    pub alcohol_end_days_var: Option<String>,
    pub admission_days_var: Option<String>,
    pub dichotomize: Vec<DichotomizeRule>,
}

/// Train-fitted state for the transforms (alcohol-gap quartile bins).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedTransforms {
    pub config: TransformConfig,
    /// Quartile edges of (admission - alcohol end) among train donors with a
    /// documented consumption end; recent gaps land in higher categories.
    pub alcohol_gap_quartiles: Option<[f64; 3]>,
}

fn num_var(record: &DonorRecord, name: &Option<String>) -> Option<f64> {
    name.as_ref()
        .and_then(|n| record.static_vars.get(n))
        .and_then(|v| v.as_ref())
        .and_then(|v| v.as_num())
}

fn cat_var<'a>(record: &'a DonorRecord, name: &str) -> Option<&'a str> {
    record
        .static_vars
        .get(name)
        .and_then(|v| v.as_ref())
        .and_then(|v| v.as_cat())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Fits the alcohol-gap bins on training donors.
pub fn fit_transforms(config: TransformConfig, train_records: &[&DonorRecord]) -> FittedTransforms {
    let mut gaps: Vec<f64> = Vec::new();
    if let (Some(_), Some(end_var), Some(adm_var)) = (
        &config.alcohol_start_days_var,
        &config.alcohol_end_days_var,
        &config.admission_days_var,
    ) {
        for rec in train_records {
            let start = num_var(rec, &config.alcohol_start_days_var);
            let end = num_var(rec, &Some(end_var.clone()));
            let adm = num_var(rec, &Some(adm_var.clone()));
            if let (Some(_), Some(end), Some(adm)) = (start, end, adm) {
                gaps.push(adm - end);
            }
        }
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alcohol_gap_quartiles = if gaps.len() >= 4 {
        Some([
            quantile(&gaps, 0.25),
            quantile(&gaps, 0.50),
            quantile(&gaps, 0.75),
        ])
    } else {
        None
    };
    FittedTransforms {
        config,
        alcohol_gap_quartiles,
    }
}

impl FittedTransforms {
    /// Feature names emitted by [`FittedTransforms::apply`], in order.
    pub fn feature_names(&self) -> Vec<String> {
        let c = &self.config;
        let mut names = Vec::new();
        if c.diuresis_last_hour_var.is_some() && c.body_weight_var.is_some() {
            names.push("diuresis last hour per bw".to_string());
        }
        if c.diuresis_total_var.is_some()
            && c.diuresis_window_hours_var.is_some()
            && c.body_weight_var.is_some()
        {
            names.push("diuresis 24h per bw".to_string());
        }
        for v in &c.creatinine_umol_vars {
            names.push(format!("{v} mg/dl"));
        }
        if c.birth_days_var.is_some() && c.diabetes_diagnosis_days_var.is_some() {
            names.push("age at diabetes diagnosis years".to_string());
        }
        if c.diabetes_diagnosis_days_var.is_some() && c.death_days_var.is_some() {
            names.push("diabetes duration years".to_string());
        }
        if c.alcohol_start_days_var.is_some() && c.admission_days_var.is_some() {
            names.push("alcohol duration days".to_string());
            names.push("last alcohol category".to_string());
        }
        for rule in &c.dichotomize {
            names.push(rule.feature_name.clone());
        }
        names
    }

    /// Computes the derived features for one donor. Non-computable features
    /// (missing inputs, non-positive body weight or window) come back as
    /// missing cells rather than errors.
    pub fn apply(&self, record: &DonorRecord) -> NamedFeatures {
        let c = &self.config;
        let mut out: NamedFeatures = Vec::new();
        let bw = num_var(record, &c.body_weight_var);

        if c.diuresis_last_hour_var.is_some() && c.body_weight_var.is_some() {
            let dlh = num_var(record, &c.diuresis_last_hour_var);
            let v = match (dlh, bw) {
                (Some(dlh), Some(bw)) if bw > 0.0 => Some(dlh / bw),
                _ => None,
            };
            out.push(("diuresis last hour per bw".to_string(), v));
        }

        if c.diuresis_total_var.is_some()
            && c.diuresis_window_hours_var.is_some()
            && c.body_weight_var.is_some()
        {
            let dt = num_var(record, &c.diuresis_total_var);
            let t = num_var(record, &c.diuresis_window_hours_var);
            let v = match (dt, t, bw) {
                (Some(dt), Some(t), Some(bw)) if t > 0.0 && bw > 0.0 => Some(dt / t * 24.0 / bw),
                _ => None,
            };
            out.push(("diuresis 24h per bw".to_string(), v));
        }

        for var in &c.creatinine_umol_vars {
            let v = num_var(record, &Some(var.clone())).map(|x| x * CREATININE_UMOL_TO_MG_DL);
            out.push((format!("{var} mg/dl"), v));
        }

        if c.birth_days_var.is_some() && c.diabetes_diagnosis_days_var.is_some() {
            let birth = num_var(record, &c.birth_days_var);
            let dx = num_var(record, &c.diabetes_diagnosis_days_var);
            let v = match (birth, dx) {
                (Some(b), Some(d)) => Some((d - b) / DAYS_PER_YEAR),
                _ => None,
            };
            out.push(("age at diabetes diagnosis years".to_string(), v));
        }

        if c.diabetes_diagnosis_days_var.is_some() && c.death_days_var.is_some() {
            let dx = num_var(record, &c.diabetes_diagnosis_days_var);
            let death = num_var(record, &c.death_days_var);
            let v = match (dx, death) {
                (Some(d), Some(dd)) => Some((dd - d) / DAYS_PER_YEAR),
                _ => None,
            };
            out.push(("diabetes duration years".to_string(), v));
        }

        if c.alcohol_start_days_var.is_some() && c.admission_days_var.is_some() {
            let start = num_var(record, &c.alcohol_start_days_var);
            let end = num_var(record, &c.alcohol_end_days_var);
            let adm = num_var(record, &c.admission_days_var);
            let (duration, category) = match (start, end, adm) {
                // No documented consumption: category 0, duration 0.
                (None, _, _) => (Some(0.0), Some(0.0)),
                // Consuming until admission.
                (Some(s), None, Some(a)) => (Some(a - s), Some(5.0)),
                (Some(s), Some(e), Some(a)) => {
                    let gap = a - e;
                    let cat = match self.alcohol_gap_quartiles {
                        Some([q1, q2, q3]) => {
                            if gap < q1 {
                                4.0
                            } else if gap < q2 {
                                3.0
                            } else if gap < q3 {
                                2.0
                            } else {
                                1.0
                            }
                        }
                        // Without fitted bins the middle categories collapse.
                        None => 2.0,
                    };
                    (Some(e - s), Some(cat))
                }
                (Some(_), _, None) => (None, None),
            };
            out.push(("alcohol duration days".to_string(), duration));
            out.push(("last alcohol category".to_string(), category));
        }

        for rule in &c.dichotomize {
            let v = cat_var(record, &rule.var).and_then(|level| {
                if rule.positive_levels.iter().any(|l| l == level) {
                    Some(1.0)
                } else if rule.negative_levels.iter().any(|l| l == level) {
                    Some(0.0)
                } else {
                    None
                }
            });
            out.push((rule.feature_name.clone(), v));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::KidneyOutcome;
    use std::collections::BTreeMap;

    fn donor(fields: &[(&str, Option<RawValue>)]) -> DonorRecord {
        DonorRecord {
            donor_id: "d".into(),
            static_vars: fields
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            timeseries: BTreeMap::new(),
            medications: vec![],
            kidney_outcomes: [Some(KidneyOutcome::Transplanted), None],
        }
    }

    fn base_config() -> TransformConfig {
        TransformConfig {
            diuresis_last_hour_var: Some("dlh".into()),
            body_weight_var: Some("bw".into()),
            diuresis_total_var: Some("dt".into()),
            diuresis_window_hours_var: Some("dt_hours".into()),
            creatinine_umol_vars: vec!["creatinine_baseline".into()],
            ..TransformConfig::default()
        }
    }

    fn get(feats: &NamedFeatures, name: &str) -> Option<f64> {
        feats.iter().find(|(k, _)| k == name).unwrap().1
    }

    #[test]
    fn diuresis_and_creatinine_formulas() {
        let ft = fit_transforms(base_config(), &[]);
        let rec = donor(&[
            ("dlh", Some(RawValue::Num(80.0))),
            ("bw", Some(RawValue::Num(80.0))),
            ("dt", Some(RawValue::Num(1200.0))),
            ("dt_hours", Some(RawValue::Num(12.0))),
            ("creatinine_baseline", Some(RawValue::Num(100.0))),
        ]);
        // bw = 50 for the 24h example.
        let rec2 = donor(&[
            ("dlh", Some(RawValue::Num(80.0))),
            ("bw", Some(RawValue::Num(50.0))),
            ("dt", Some(RawValue::Num(1200.0))),
            ("dt_hours", Some(RawValue::Num(12.0))),
            ("creatinine_baseline", Some(RawValue::Num(100.0))),
        ]);
        let f = ft.apply(&rec);
        assert_eq!(get(&f, "diuresis last hour per bw"), Some(1.0));
        let f2 = ft.apply(&rec2);
        assert_eq!(get(&f2, "diuresis 24h per bw"), Some(48.0));
        assert!((get(&f, "creatinine_baseline mg/dl").unwrap() - 1.1312).abs() < 1e-12);
    }

    #[test]
    fn non_positive_inputs_yield_missing() {
        let ft = fit_transforms(base_config(), &[]);
        let rec = donor(&[
            ("dlh", Some(RawValue::Num(80.0))),
            ("bw", Some(RawValue::Num(0.0))),
            ("dt", Some(RawValue::Num(1200.0))),
            ("dt_hours", Some(RawValue::Num(-1.0))),
        ]);
        let f = ft.apply(&rec);
        assert_eq!(get(&f, "diuresis last hour per bw"), None);
        assert_eq!(get(&f, "diuresis 24h per bw"), None);
        assert_eq!(get(&f, "creatinine_baseline mg/dl"), None);
    }

    fn alcohol_config() -> TransformConfig {
        TransformConfig {
            alcohol_start_days_var: Some("alc_start".into()),
            alcohol_end_days_var: Some("alc_end".into()),
            admission_days_var: Some("admission".into()),
            ..TransformConfig::default()
        }
    }

    #[test]
    fn alcohol_categories() {
        // Train gaps: 10, 20, 30, 40 days -> quartiles 17.5 / 25 / 32.5.
        let train: Vec<DonorRecord> = [10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|gap| {
                donor(&[
                    ("alc_start", Some(RawValue::Num(0.0))),
                    ("alc_end", Some(RawValue::Num(100.0))),
                    ("admission", Some(RawValue::Num(100.0 + gap))),
                ])
            })
            .collect();
        let refs: Vec<&DonorRecord> = train.iter().collect();
        let ft = fit_transforms(alcohol_config(), &refs);

        // No documented consumption -> category 0.
        let f = ft.apply(&donor(&[("admission", Some(RawValue::Num(0.0)))]));
        assert_eq!(get(&f, "last alcohol category"), Some(0.0));

        // Consuming until admission -> category 5, duration = admission - start.
        let f = ft.apply(&donor(&[
            ("alc_start", Some(RawValue::Num(10.0))),
            ("admission", Some(RawValue::Num(110.0))),
        ]));
        assert_eq!(get(&f, "last alcohol category"), Some(5.0));
        assert_eq!(get(&f, "alcohol duration days"), Some(100.0));

        // Recent stop (small gap) -> high category; old stop -> low category.
        let recent = ft.apply(&donor(&[
            ("alc_start", Some(RawValue::Num(0.0))),
            ("alc_end", Some(RawValue::Num(100.0))),
            ("admission", Some(RawValue::Num(112.0))), // gap 12 < q1
        ]));
        assert_eq!(get(&recent, "last alcohol category"), Some(4.0));
        let old = ft.apply(&donor(&[
            ("alc_start", Some(RawValue::Num(0.0))),
            ("alc_end", Some(RawValue::Num(100.0))),
            ("admission", Some(RawValue::Num(150.0))), // gap 50 >= q3
        ]));
        assert_eq!(get(&old, "last alcohol category"), Some(1.0));
    }

    #[test]
    fn dichotomize_rule() {
        let config = TransformConfig {
            dichotomize: vec![DichotomizeRule {
                var: "ekg_qrs".into(),
                feature_name: "ekg qrs abnormal".into(),
                positive_levels: vec![
                    "others".into(),
                    "MI-like".into(),
                    "RSB".into(),
                    "LSB".into(),
                    "bifascicular block".into(),
                ],
                negative_levels: vec!["no".into()],
            }],
            ..TransformConfig::default()
        };
        let ft = fit_transforms(config, &[]);
        let f = ft.apply(&donor(&[("ekg_qrs", Some(RawValue::Cat("RSB".into())))]));
        assert_eq!(get(&f, "ekg qrs abnormal"), Some(1.0));
        let f = ft.apply(&donor(&[("ekg_qrs", Some(RawValue::Cat("no".into())))]));
        assert_eq!(get(&f, "ekg qrs abnormal"), Some(0.0));
        let f = ft.apply(&donor(&[("ekg_qrs", None)]));
        assert_eq!(get(&f, "ekg qrs abnormal"), None);
    }
}
