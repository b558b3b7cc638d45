//! Donor cohort ingestion, labeling, splitting, and standardization.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng;

/// A raw scalar value as found in donor records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Num(f64),
    Cat(String),
}

impl RawValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            RawValue::Num(v) => Some(*v),
            RawValue::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            RawValue::Cat(s) => Some(s),
            RawValue::Num(_) => None,
        }
    }
}

/// Outcome of a single kidney.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KidneyOutcome {
    Transplanted,
    Discarded,
}

/// Donor-level label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeLabel {
    Transplanted,
    Discarded,
}

/// One point of a named time series: hours since the first hospital record,
/// plus the observed value.
pub type TimePoint = (f64, RawValue);

/// One donor: static variables, named time series, medication strings, and
/// per-kidney outcomes (either possibly unknown).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DonorRecord {
    pub donor_id: String,
    #[serde(default)]
    pub static_vars: BTreeMap<String, Option<RawValue>>,
    #[serde(default)]
    pub timeseries: BTreeMap<String, Vec<TimePoint>>,
    #[serde(default)]
    pub medications: Vec<String>,
    pub kidney_outcomes: [Option<KidneyOutcome>; 2],
}

impl DonorRecord {
    /// Checks the record-level invariants: sorted time series and at least
    /// one known kidney outcome.
    pub fn validate(&self) -> Result<()> {
        if self.kidney_outcomes.iter().all(|o| o.is_none()) {
            return Err(Error::Label(format!(
                "donor {}: both kidney outcomes unknown",
                self.donor_id
            )));
        }
        for (name, points) in &self.timeseries {
            if points.windows(2).any(|w| w[0].0 > w[1].0) {
                return Err(Error::Feature(format!(
                    "donor {}: time series '{}' not sorted by time",
                    self.donor_id, name
                )));
            }
        }
        Ok(())
    }
}

/// Derives the donor-level label: transplanted iff at least one kidney was
/// transplanted; unknown outcomes are treated as absent evidence.
pub fn derive_label(record: &DonorRecord) -> Result<OutcomeLabel> {
    if record.kidney_outcomes.iter().all(|o| o.is_none()) {
        return Err(Error::Label(format!(
            "donor {}: both kidney outcomes unknown",
            record.donor_id
        )));
    }
    let any_transplanted = record
        .kidney_outcomes
        .contains(&Some(KidneyOutcome::Transplanted));
    Ok(if any_transplanted {
        OutcomeLabel::Transplanted
    } else {
        OutcomeLabel::Discarded
    })
}

/// A cohort with the derived donor-level labels.
#[derive(Debug, Clone)]
pub struct LabeledCohort {
    pub records: Vec<DonorRecord>,
    pub labels: BTreeMap<String, OutcomeLabel>,
}

impl LabeledCohort {
    /// Builds the cohort, deriving labels and checking invariants.
    pub fn from_records(records: Vec<DonorRecord>) -> Result<LabeledCohort> {
        let mut labels = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.donor_id.clone()) {
                return Err(Error::Label(format!("duplicate donor id '{}'", r.donor_id)));
            }
            r.validate()?;
            labels.insert(r.donor_id.clone(), derive_label(r)?);
        }
        Ok(LabeledCohort { records, labels })
    }

    pub fn n_donors(&self) -> usize {
        self.records.len()
    }

    pub fn label_of(&self, donor_id: &str) -> Option<OutcomeLabel> {
        self.labels.get(donor_id).copied()
    }

    pub fn discard_count(&self) -> usize {
        self.labels
            .values()
            .filter(|&&l| l == OutcomeLabel::Discarded)
            .count()
    }

    /// Writes the cohort as JSON lines, one donor per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a cohort from JSON lines.
    pub fn read_jsonl(path: &Path) -> Result<LabeledCohort> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut records = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str::<DonorRecord>(&line)?);
        }
        LabeledCohort::from_records(records)
    }
}

/// Train/validation/test partition over donor ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

impl SplitIndex {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<SplitIndex> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Train-pool ids: train plus validation.
    pub fn pool_ids(&self) -> Vec<String> {
        let mut v = self.train_ids.clone();
        v.extend(self.val_ids.iter().cloned());
        v
    }
}

const SALT_SPLIT: u64 = 0x5311;

fn round_half_away(x: f64) -> usize {
    x.round() as usize
}

/// Splits a cohort 80/20 by donor id, then carves a fixed 10% of the train
/// pool as validation, stratified by label so the discard rate carries over.
/// Deterministic given the seed.
pub fn split_cohort(cohort: &LabeledCohort, seed: u64) -> Result<SplitIndex> {
    let n = cohort.n_donors();
    if n < 10 {
        return Err(Error::Split(format!("cohort too small to split: {n} < 10")));
    }
    let ids: Vec<&String> = cohort.records.iter().map(|r| &r.donor_id).collect();

    // 80/20 test split: uniform over donor ids.
    let mut rng_split = rng::stream(seed, SALT_SPLIT, 0);
    let order = rng::shuffled_indices(n, &mut rng_split);
    let n_test = round_half_away(0.20 * n as f64);
    let test_ids: Vec<String> = order[..n_test].iter().map(|&i| ids[i].clone()).collect();
    let pool: Vec<String> = order[n_test..].iter().map(|&i| ids[i].clone()).collect();

    // Validation carve: 10% of the pool, stratified by label with
    // largest-remainder allocation so the total is exact.
    let n_val = round_half_away(0.10 * pool.len() as f64);
    let mut by_class: BTreeMap<bool, Vec<String>> = BTreeMap::new();
    for id in &pool {
        let discarded = cohort.label_of(id) == Some(OutcomeLabel::Discarded);
        by_class.entry(discarded).or_default().push(id.clone());
    }
    let mut quotas: Vec<(bool, usize, f64)> = by_class
        .iter()
        .map(|(&cls, members)| {
            let exact = n_val as f64 * members.len() as f64 / pool.len() as f64;
            (cls, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut assigned: usize = quotas.iter().map(|q| q.1).sum();
    quotas.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    let mut qi = 0;
    let n_quotas = quotas.len();
    while assigned < n_val {
        quotas[qi % n_quotas].1 += 1;
        assigned += 1;
        qi += 1;
    }
    let mut val_ids = Vec::with_capacity(n_val);
    let mut train_ids = Vec::new();
    let mut rng_val = rng::stream(seed, SALT_SPLIT, 1);
    for (cls, take, _) in quotas {
        let members = &by_class[&cls];
        let order = rng::shuffled_indices(members.len(), &mut rng_val);
        for (pos, &i) in order.iter().enumerate() {
            if pos < take {
                val_ids.push(members[i].clone());
            } else {
                train_ids.push(members[i].clone());
            }
        }
    }
    train_ids.sort();
    val_ids.sort();
    let mut test_ids = test_ids;
    test_ids.sort();
    Ok(SplitIndex {
        train_ids,
        val_ids,
        test_ids,
        seed,
    })
}

/// Train-fitted z-score scaler using the population standard deviation.
/// Zero-variance features map to 0 after transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StandardScaler {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl StandardScaler {
    /// Fits on the given rows of a complete matrix.
    pub fn fit(matrix: &FeatureMatrix, rows: &[usize]) -> Result<StandardScaler> {
        if matrix.missing_count() > 0 {
            return Err(Error::Scale(
                "matrix has missing values; impute first".into(),
            ));
        }
        if rows.is_empty() {
            return Err(Error::Scale("no rows to fit on".into()));
        }
        let c = matrix.n_cols();
        let mut means = vec![0.0; c];
        let mut stds = vec![0.0; c];
        let mut zero_variance = vec![false; c];
        for col in 0..c {
            let vals: Vec<f64> = rows.iter().map(|&r| matrix.get(r, col).unwrap()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            means[col] = mean;
            if var > 0.0 {
                stds[col] = var.sqrt();
            } else {
                stds[col] = 0.0;
                zero_variance[col] = true;
            }
        }
        Ok(StandardScaler {
            feature_names: matrix.feature_names.clone(),
            means,
            stds,
            zero_variance,
        })
    }

    /// Applies the transform to every row of a matrix with matching columns.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.missing_count() > 0 {
            return Err(Error::Scale(
                "matrix has missing values; impute first".into(),
            ));
        }
        if matrix.feature_names != self.feature_names {
            return Err(Error::Scale(
                "feature names differ from the fitted schema".into(),
            ));
        }
        let mut out = matrix.clone();
        for r in 0..out.n_rows() {
            for c in 0..out.n_cols() {
                let v = matrix.get(r, c).unwrap();
                let z = if self.zero_variance[c] {
                    0.0
                } else {
                    (v - self.means[c]) / self.stds[c]
                };
                out.set(r, c, z);
            }
        }
        Ok(out)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<StandardScaler> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Deterministic stratified sample of row indices (used for SHAP background).
pub fn stratified_subsample(labels: &[u8], max_rows: usize, seed: u64) -> Vec<usize> {
    if labels.len() <= max_rows {
        return (0..labels.len()).collect();
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 0).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let mut r = rng::stream(seed, 0xbac, 0);
    let shuffle = |v: &mut Vec<usize>, r: &mut rand_chacha::ChaCha8Rng| {
        for i in (1..v.len()).rev() {
            let j = r.gen_range(0..=i);
            v.swap(i, j);
        }
    };
    shuffle(&mut pos, &mut r);
    shuffle(&mut neg, &mut r);
    let n_pos = ((pos.len() as f64 / labels.len() as f64) * max_rows as f64).round() as usize;
    let n_pos = n_pos.min(pos.len()).min(max_rows);
    let n_neg = (max_rows - n_pos).min(neg.len());
    let mut out: Vec<usize> = pos[..n_pos]
        .iter()
        .chain(neg[..n_neg].iter())
        .copied()
        .collect();
    out.sort_unstable();
    out
}
