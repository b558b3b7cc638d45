//! Seeded retraining harness: one model per seed on the fixed 90/10
//! train/validation split, evaluated on the held-out test set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::models::{AnyModel, ModelFamily};

use super::metrics::{auc, confusion, f1, normed_mcc};

/// The fixed data splits used for retraining.
pub struct RetrainData<'a> {
    pub x_train: &'a DenseMatrix,
    pub y_train: &'a [u8],
    pub x_val: &'a DenseMatrix,
    pub y_val: &'a [u8],
    pub x_test: &'a DenseMatrix,
    pub y_test: &'a [u8],
}

/// Test metrics of one seeded run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRunResult {
    pub family: ModelFamily,
    pub seed: u64,
    pub f1: f64,
    pub auc: f64,
    pub normed_mcc: f64,
    pub wall_time_ms: f64,
    /// Populated when the run failed; metrics are NaN then.
    pub error: Option<String>,
}

impl SeedRunResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// A completed run: metrics plus the fitted model (absent on failure).
pub struct SeedRun {
    pub result: SeedRunResult,
    pub model: Option<AnyModel>,
}

/// Retrains one model per seed in parallel. Individual failures are
/// recorded and the run continues; fewer than 90% successes is an error.
pub fn seeded_retrain<F>(
    family: ModelFamily,
    fit: F,
    data: &RetrainData<'_>,
    seeds: &[u64],
) -> Result<Vec<SeedRun>>
where
    F: Fn(&RetrainData<'_>, u64) -> Result<AnyModel> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::Metric("no seeds supplied".into()));
    }
    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| {
            let start = std::time::Instant::now();
            match fit(data, seed).and_then(|model| {
                let probs = model.predict_proba_batch(data.x_test);
                let c = confusion(data.y_test, &probs, 0.5)?;
                let auc_v = auc(data.y_test, &probs)?;
                Ok((model, f1(&c), auc_v, normed_mcc(&c)))
            }) {
                Ok((model, f1_v, auc_v, nmcc)) => SeedRun {
                    result: SeedRunResult {
                        family,
                        seed,
                        f1: f1_v,
                        auc: auc_v,
                        normed_mcc: nmcc,
                        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                        error: None,
                    },
                    model: Some(model),
                },
                Err(e) => SeedRun {
                    result: SeedRunResult {
                        family,
                        seed,
                        f1: f64::NAN,
                        auc: f64::NAN,
                        normed_mcc: f64::NAN,
                        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                        error: Some(e.to_string()),
                    },
                    model: None,
                },
            }
        })
        .collect();
    let ok = runs.iter().filter(|r| r.result.succeeded()).count();
    if (ok as f64) < 0.9 * seeds.len() as f64 {
        return Err(Error::Metric(format!(
            "only {ok}/{} seeded runs succeeded",
            seeds.len()
        )));
    }
    Ok(runs)
}
