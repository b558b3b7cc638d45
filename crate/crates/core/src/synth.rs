//! Synthetic donor cohorts with a known ground-truth discard mechanism.
//!
//! Latent engineered features are defined before missingness is injected,
//! so imputation quality is measurable end to end. The label is drawn from
//! a logistic model on those latent features, with the intercept bisected
//! to hit the target discard prevalence on the realized draw. A
//! heparinoid-like medication is sampled conditional on the label to
//! reproduce the procedure-correlated confound.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DonorRecord, KidneyOutcome, LabeledCohort, RawValue};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

const SALT_SYNTH: u64 = 0x5e17;

/// Configuration of the synthetic cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_donors: usize,
    pub seed: u64,
    /// Target discard prevalence (fraction of donors labeled discarded).
    pub target_discard_prevalence: f64,
    /// Tolerance on the realized prevalence.
    pub prevalence_tolerance: f64,
    /// Latent-feature weights toward *transplantation* (positive class).
    pub weights: BTreeMap<String, f64>,
    /// Extra pure-noise numeric variables.
    pub n_noise_static: usize,
    /// Missingness rate of noise variables (iterative-imputer class).
    pub noise_missing_rate: f64,
    /// Missingness rate of physiological variables (normal-sample class).
    pub physio_missing_rate: f64,
    /// Missingness rate of the high-missingness marker variable.
    pub sparse_missing_rate: f64,
    /// Heparinoid administration rates conditional on the label.
    pub heparin_rate_transplanted: f64,
    pub heparin_rate_discarded: f64,
    /// Number of distinct noise medication tokens.
    pub n_noise_medications: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        weights.insert("age".to_string(), -0.9);
        weights.insert("creatinine_slope".to_string(), -0.8);
        weights.insert("creatinine_last".to_string(), -0.6);
        weights.insert("urea_level".to_string(), -0.5);
        weights.insert("potassium_level".to_string(), -0.3);
        weights.insert("urine_glucose_pos".to_string(), -0.5);
        weights.insert("diuresis_per_bw".to_string(), 0.6);
        weights.insert("diabetes".to_string(), -0.3);
        weights.insert("sparse_marker_missing".to_string(), 0.3);
        SynthConfig {
            n_donors: 2000,
            seed: 0,
            target_discard_prevalence: 0.228,
            prevalence_tolerance: 0.005,
            weights,
            n_noise_static: 6,
            noise_missing_rate: 0.10,
            physio_missing_rate: 0.15,
            sparse_missing_rate: 0.85,
            heparin_rate_transplanted: 0.99,
            heparin_rate_discarded: 0.80,
            n_noise_medications: 45,
        }
    }
}

/// Ground truth serialized alongside the cohort (separate file, never read
/// by pipeline stages).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub weights: BTreeMap<String, f64>,
    pub intercept: f64,
    /// Names of latent features with nonzero weight.
    pub informative: Vec<String>,
    /// Label-correlated features that are consequences, not causes.
    pub confounds: Vec<String>,
    pub realized_discard_prevalence: f64,
}

impl GroundTruth {
    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<GroundTruth> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Latent per-donor state generated before missingness injection.
struct DonorLatent {
    age: f64,
    body_weight: f64,
    creatinine_base: f64,
    creatinine_slope: f64,
    creatinine_last: f64,
    urea_level: f64,
    potassium_level: f64,
    urine_glucose_pos: bool,
    diuresis_last_hour: f64,
    diabetes: bool,
    sparse_marker_missing: bool,
    uniform: f64,
}

fn standardize(v: f64, mean: f64, sd: f64) -> f64 {
    (v - mean) / sd
}

/// Generates the cohort and its ground truth.
pub fn generate_cohort(config: &SynthConfig) -> Result<(LabeledCohort, GroundTruth)> {
    if config.n_donors < 10 {
        return Err(Error::Synth("need at least 10 donors".into()));
    }
    if !(0.0..1.0).contains(&config.target_discard_prevalence)
        || config.target_discard_prevalence == 0.0
    {
        return Err(Error::Synth("prevalence must lie in (0, 1)".into()));
    }

    // Latent per-donor state.
    let mut latents: Vec<DonorLatent> = Vec::with_capacity(config.n_donors);
    for i in 0..config.n_donors {
        let mut r = rng::stream(config.seed, SALT_SYNTH, i as u64);
        let age = 18.0 + 67.0 * r.gen::<f64>();
        let body_weight = 50.0 + 60.0 * r.gen::<f64>();
        let creatinine_base = 70.0 + 40.0 * rng::standard_normal(&mut r).abs();
        let creatinine_slope = 0.6 * rng::standard_normal(&mut r);
        let creatinine_last =
            creatinine_base + creatinine_slope * 48.0 + 4.0 * rng::standard_normal(&mut r);
        let urea_level = 5.5 + 2.0 * rng::standard_normal(&mut r);
        let potassium_level = 4.4 + 0.5 * rng::standard_normal(&mut r);
        let urine_glucose_pos = r.gen::<f64>() < 0.25;
        let diuresis_last_hour = (70.0 + 35.0 * rng::standard_normal(&mut r)).max(1.0);
        let diabetes = r.gen::<f64>() < 0.18;
        let sparse_marker_missing = r.gen::<f64>() < config.sparse_missing_rate;
        latents.push(DonorLatent {
            age,
            body_weight,
            creatinine_base,
            creatinine_slope,
            creatinine_last,
            urea_level,
            potassium_level,
            urine_glucose_pos,
            diuresis_last_hour,
            diabetes,
            sparse_marker_missing,
            uniform: r.gen::<f64>(),
        });
    }

    // Standardized latent features entering the label model.
    let z_of = |l: &DonorLatent| -> BTreeMap<&'static str, f64> {
        let mut z = BTreeMap::new();
        z.insert("age", standardize(l.age, 51.5, 19.3));
        z.insert(
            "creatinine_slope",
            standardize(l.creatinine_slope, 0.0, 0.6),
        );
        z.insert(
            "creatinine_last",
            standardize(l.creatinine_last, 102.0, 45.0),
        );
        z.insert("urea_level", standardize(l.urea_level, 5.5, 2.0));
        z.insert("potassium_level", standardize(l.potassium_level, 4.4, 0.5));
        z.insert(
            "urine_glucose_pos",
            if l.urine_glucose_pos { 1.0 } else { 0.0 },
        );
        z.insert(
            "diuresis_per_bw",
            standardize(l.diuresis_last_hour / l.body_weight, 0.9, 0.45),
        );
        z.insert("diabetes", if l.diabetes { 1.0 } else { 0.0 });
        z.insert(
            "sparse_marker_missing",
            if l.sparse_marker_missing { 1.0 } else { 0.0 },
        );
        z
    };
    let scores: Vec<f64> = latents
        .iter()
        .map(|l| {
            let z = z_of(l);
            config
                .weights
                .iter()
                .map(|(name, w)| w * z.get(name.as_str()).copied().unwrap_or(0.0))
                .sum()
        })
        .collect();

    // Bisect the intercept so the realized discard rate hits the target:
    // donor i is transplanted iff uniform_i < sigmoid(score_i + b).
    let target_transplant = 1.0 - config.target_discard_prevalence;
    let realized_transplant_rate = |b: f64| -> f64 {
        latents
            .iter()
            .zip(&scores)
            .filter(|(l, s)| l.uniform < sigmoid(*s + b))
            .count() as f64
            / config.n_donors as f64
    };
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if realized_transplant_rate(mid) < target_transplant {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let intercept = 0.5 * (lo + hi);
    let realized = 1.0 - realized_transplant_rate(intercept);
    if (realized - config.target_discard_prevalence).abs() > config.prevalence_tolerance {
        return Err(Error::Synth(format!(
            "target prevalence {} unreachable: realized {realized}",
            config.target_discard_prevalence
        )));
    }

    let transplanted: Vec<bool> = latents
        .iter()
        .zip(&scores)
        .map(|(l, s)| l.uniform < sigmoid(s + intercept))
        .collect();

    // Materialize donor records with missingness injected per strategy class.
    let noise_meds: Vec<String> = (0..config.n_noise_medications)
        .map(|i| format!("Med{i:02}"))
        .collect();
    let mut records = Vec::with_capacity(config.n_donors);
    for (i, l) in latents.iter().enumerate() {
        let mut r = rng::stream(config.seed, SALT_SYNTH ^ 0xf00d, i as u64);
        let mut static_vars: BTreeMap<String, Option<RawValue>> = BTreeMap::new();
        let num = |v: f64| Some(RawValue::Num(v));
        let cat = |s: &str| Some(RawValue::Cat(s.to_string()));

        static_vars.insert("age".into(), num(l.age));
        static_vars.insert("body_weight".into(), num(l.body_weight));
        // Physiological vars: normal-sample imputation class.
        static_vars.insert(
            "diuresis_last_hour".into(),
            if r.gen::<f64>() < config.physio_missing_rate {
                None
            } else {
                num(l.diuresis_last_hour)
            },
        );
        static_vars.insert(
            "creatinine_baseline".into(),
            if r.gen::<f64>() < config.physio_missing_rate {
                None
            } else {
                num(l.creatinine_base)
            },
        );
        // Diuresis window for the 24h transform.
        let window = 6.0 + 18.0 * r.gen::<f64>();
        static_vars.insert("diuresis_window_hours".into(), num(window));
        static_vars.insert(
            "diuresis_total".into(),
            num(l.diuresis_last_hour * window * (0.85 + 0.3 * r.gen::<f64>())),
        );
        // Diagnosis flag: missing means absent (logical default).
        static_vars.insert(
            "diagnosis_diabetes".into(),
            if l.diabetes { num(1.0) } else { None },
        );
        // Diabetes history for the derived features.
        let birth = -(l.age * 365.25);
        static_vars.insert("birth_days".into(), num(birth));
        static_vars.insert("death_days".into(), num(0.0));
        static_vars.insert(
            "diabetes_diagnosis_days".into(),
            if l.diabetes {
                num(birth + (l.age - 8.0 * r.gen::<f64>()).max(10.0) * 365.25)
            } else {
                None
            },
        );
        // Alcohol history.
        static_vars.insert("admission_days".into(), num(-10.0));
        if r.gen::<f64>() < 0.4 {
            let start = -(4000.0 + 3000.0 * r.gen::<f64>());
            static_vars.insert("alcohol_start_days".into(), num(start));
            if r.gen::<f64>() < 0.5 {
                static_vars.insert(
                    "alcohol_end_days".into(),
                    num(-10.0 - 700.0 * r.gen::<f64>()),
                );
            } else {
                static_vars.insert("alcohol_end_days".into(), None);
            }
        } else {
            static_vars.insert("alcohol_start_days".into(), None);
            static_vars.insert("alcohol_end_days".into(), None);
        }
        // EKG finding for the dichotomize rule.
        let ekg = match (r.gen::<f64>() * 10.0) as usize {
            0 => "others",
            1 => "MI-like",
            2 => "RSB",
            3 => "LSB",
            _ => "no",
        };
        static_vars.insert("ekg_qrs".into(), cat(ekg));
        // ICD-like primary diagnosis with rare levels.
        let icd = if r.gen::<f64>() < 0.015 {
            format!("Z{:02}", r.gen_range(0..6))
        } else {
            format!("I{:02}", r.gen_range(0..5))
        };
        static_vars.insert("icd_primary".into(), cat(&icd));
        // Urine glucose: missing-as-category variable.
        static_vars.insert(
            "urine_glucose".into(),
            if r.gen::<f64>() < 0.2 {
                None
            } else if l.urine_glucose_pos {
                cat("pos")
            } else {
                cat("neg")
            },
        );
        // CPR duration backed by a config rule over cpr_info.
        let cpr_kind = (r.gen::<f64>() * 3.0) as usize;
        static_vars.insert(
            "cpr_info".into(),
            cat(["none", "brief resuscitation", "prolonged cpr"][cpr_kind]),
        );
        static_vars.insert(
            "cpr_duration".into(),
            if r.gen::<f64>() < 0.5 {
                None
            } else {
                num([0.0, 5.0, 30.0][cpr_kind] + r.gen::<f64>())
            },
        );
        // ECMO flag backed by a config rule.
        let ecmo_used = r.gen::<f64>() < 0.08;
        static_vars.insert(
            "ecmo_info".into(),
            cat(if ecmo_used { "ecmo support" } else { "none" }),
        );
        static_vars.insert(
            "ecmo".into(),
            if r.gen::<f64>() < 0.6 {
                None
            } else {
                num(if ecmo_used { 1.0 } else { 0.0 })
            },
        );
        // High-missingness marker (dichotomized downstream); missingness
        // itself carries signal.
        static_vars.insert(
            "sparse_marker".into(),
            if l.sparse_marker_missing {
                None
            } else {
                num(r.gen::<f64>())
            },
        );
        // Pure noise variables (iterative-imputer class).
        for k in 0..config.n_noise_static {
            static_vars.insert(
                format!("noise_{k:02}"),
                if r.gen::<f64>() < config.noise_missing_rate {
                    None
                } else {
                    num(rng::standard_normal(&mut r))
                },
            );
        }

        // Time series.
        let mut timeseries: BTreeMap<String, Vec<(f64, RawValue)>> = BTreeMap::new();
        let n_creat = 3 + (r.gen::<f64>() * 4.0) as usize;
        let mut creat_points = Vec::with_capacity(n_creat);
        for k in 0..n_creat {
            let t = 48.0 * k as f64 / (n_creat - 1).max(1) as f64 + 0.5 * r.gen::<f64>();
            let level = if k == n_creat - 1 {
                l.creatinine_last
            } else {
                l.creatinine_base + l.creatinine_slope * t + 3.0 * rng::standard_normal(&mut r)
            };
            creat_points.push((t, RawValue::Num(level)));
        }
        timeseries.insert("creatinine".into(), creat_points);

        let n_urea = 2 + (r.gen::<f64>() * 3.0) as usize;
        let urea_points: Vec<(f64, RawValue)> = (0..n_urea)
            .map(|k| {
                (
                    24.0 * k as f64 / n_urea as f64,
                    RawValue::Num(l.urea_level + 0.6 * rng::standard_normal(&mut r)),
                )
            })
            .collect();
        timeseries.insert("urea".into(), urea_points);

        // Sparse numeric series (mean observations per donor below two).
        let mut potassium_points = vec![(
            2.0,
            RawValue::Num(l.potassium_level + 0.1 * rng::standard_normal(&mut r)),
        )];
        if r.gen::<f64>() < 0.3 {
            potassium_points.push((
                20.0,
                RawValue::Num(l.potassium_level + 0.1 * rng::standard_normal(&mut r)),
            ));
        }
        timeseries.insert("potassium".into(), potassium_points);

        // Pos/neg categorical series.
        let n_nitrite = 1 + (r.gen::<f64>() * 2.0) as usize;
        let nitrite_points: Vec<(f64, RawValue)> = (0..n_nitrite)
            .map(|k| {
                let neg = r.gen::<f64>() < if transplanted[i] { 0.85 } else { 0.6 };
                (
                    12.0 * k as f64,
                    RawValue::Cat(if neg { "neg".into() } else { "pos".into() }),
                )
            })
            .collect();
        timeseries.insert("nitrite".into(), nitrite_points);

        // Dense noise series.
        let ph_points: Vec<(f64, RawValue)> = (0..4)
            .map(|k| {
                (
                    8.0 * k as f64,
                    RawValue::Num(7.38 + 0.05 * rng::standard_normal(&mut r)),
                )
            })
            .collect();
        timeseries.insert("ph_blood".into(), ph_points);

        // Medications: the heparinoid confound plus noise tokens.
        let mut medications = Vec::new();
        let heparin_rate = if transplanted[i] {
            config.heparin_rate_transplanted
        } else {
            config.heparin_rate_discarded
        };
        if r.gen::<f64>() < heparin_rate {
            medications.push(format!(
                "Heparin {}00 IE",
                25 + (r.gen::<f64>() * 50.0) as usize
            ));
        }
        if l.diabetes && r.gen::<f64>() < 0.8 {
            medications.push("Insulin 10 IE".to_string());
        }
        for (mi, med) in noise_meds.iter().enumerate() {
            // Token frequency decays with index, exercising the top-40 cut.
            let p = 0.5 / (1.0 + mi as f64 * 0.25);
            if r.gen::<f64>() < p {
                medications.push(format!("{med} {} mg", 1 + (r.gen::<f64>() * 9.0) as usize));
            }
        }

        // Kidney outcomes consistent with the donor-level label; a slice of
        // transplanted donors has one discarded or unknown contralateral
        // kidney.
        let kidney_outcomes = if transplanted[i] {
            let u = r.gen::<f64>();
            if u < 0.75 {
                [
                    Some(KidneyOutcome::Transplanted),
                    Some(KidneyOutcome::Transplanted),
                ]
            } else if u < 0.95 {
                [
                    Some(KidneyOutcome::Transplanted),
                    Some(KidneyOutcome::Discarded),
                ]
            } else {
                [Some(KidneyOutcome::Transplanted), None]
            }
        } else {
            let u = r.gen::<f64>();
            if u < 0.9 {
                [
                    Some(KidneyOutcome::Discarded),
                    Some(KidneyOutcome::Discarded),
                ]
            } else {
                [Some(KidneyOutcome::Discarded), None]
            }
        };

        records.push(DonorRecord {
            donor_id: format!("synth-{i:05}"),
            static_vars,
            timeseries,
            medications,
            kidney_outcomes,
        });
    }

    let cohort = LabeledCohort::from_records(records)?;
    let informative: Vec<String> = config
        .weights
        .iter()
        .filter(|(_, &w)| w != 0.0)
        .map(|(n, _)| n.clone())
        .collect();
    let truth = GroundTruth {
        weights: config.weights.clone(),
        intercept,
        informative,
        confounds: vec!["medication Heparin".to_string(), "nitrite".to_string()],
        realized_discard_prevalence: realized,
    };
    Ok((cohort, truth))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Planted feature matrix for selection-recovery tests: `n_informative`
/// signal columns, `n_noise` standard-normal noise columns, noiseless
/// labels from a linear threshold over the signal columns only. Every
/// informative feature is needed for a clean fit, while noise features can
/// only dilute it, so the sparse genome is the optimum.
pub fn planted_matrix(
    n_rows: usize,
    n_informative: usize,
    n_noise: usize,
    seed: u64,
) -> (DenseMatrix, Vec<u8>, Vec<usize>) {
    let mut r = rng::from_seed(seed);
    let d = n_informative + n_noise;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    // Alternating-sign strong weights.
    let weights: Vec<f64> = (0..n_informative)
        .map(|j| if j % 2 == 0 { 2.5 } else { -2.5 })
        .collect();
    for _ in 0..n_rows {
        let row: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut r)).collect();
        let score: f64 = weights.iter().zip(&row).map(|(w, v)| w * v).sum();
        y.push((score > 0.0) as u8);
        rows.push(row);
    }
    (
        DenseMatrix::from_rows(&rows),
        y,
        (0..n_informative).collect(),
    )
}
