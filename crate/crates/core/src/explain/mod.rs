//! Model-agnostic Shapley attributions: an exact small-dimension
//! enumeration oracle, a permutation sampler with antithetic pairing, and
//! global aggregation by mean absolute value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

const SALT_SHAP: u64 = 0x54a9;

/// Per-feature attribution for one explained sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attribution {
    /// phi per feature, in probability units.
    pub values: Vec<f64>,
    /// Expected model output over the background.
    pub base_value: f64,
    /// Model output at the explained point.
    pub output: f64,
    /// Monte-Carlo standard error per feature (zero in exact mode).
    pub std_error: Vec<f64>,
}

impl Attribution {
    /// Additivity gap |sum(phi) - (output - base)|.
    pub fn additivity_gap(&self) -> f64 {
        (self.values.iter().sum::<f64>() - (self.output - self.base_value)).abs()
    }
}

/// Permutation-based Shapley attribution. Each sampled feature ordering is
/// walked forward (background -> x) and backward (x -> background,
/// antithetic pairing), crediting marginal output changes; credits average
/// over permutations and background rows. The telescoping sum makes
/// additivity exact for every permutation.
pub fn permutation_shap<F>(
    model: &F,
    x: &[f64],
    background: &DenseMatrix,
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if background.n_rows == 0 {
        return Err(Error::Explain("background must be nonempty".into()));
    }
    if n_permutations < 1 {
        return Err(Error::Explain("n_permutations must be at least 1".into()));
    }
    let d = x.len();
    if background.n_cols != d {
        return Err(Error::Explain(
            "background width differs from the explained point".into(),
        ));
    }

    let output = model(x);
    let base_value = (0..background.n_rows)
        .map(|r| model(background.row(r)))
        .sum::<f64>()
        / background.n_rows as f64;

    // One walk pair per (permutation, background row); every feature gets
    // exactly two credits per pair.
    let walks: Vec<(usize, usize)> = (0..n_permutations)
        .flat_map(|p| (0..background.n_rows).map(move |b| (p, b)))
        .collect();
    let credit_sets: Vec<Vec<(f64, f64)>> = walks
        .par_iter()
        .map(|&(p, b)| {
            let mut perm_rng = rng::stream(seed, SALT_SHAP, p as u64);
            let order = rng::shuffled_indices(d, &mut perm_rng);
            let bg = background.row(b);
            let mut credits = vec![(0.0f64, 0.0f64); d];

            // Forward: replace background values by x's values.
            let mut z = bg.to_vec();
            let mut prev = model(&z);
            for &f in &order {
                z[f] = x[f];
                let cur = model(&z);
                credits[f].0 = cur - prev;
                prev = cur;
            }
            // Backward (antithetic): revert to background in reversed order,
            // continuing from the model value at x.
            for &f in order.iter().rev() {
                z[f] = bg[f];
                let cur = model(&z);
                credits[f].1 = prev - cur;
                prev = cur;
            }
            credits
        })
        .collect();

    // Forward and backward credits of one walk are correlated, so the
    // Monte-Carlo error is estimated over per-walk pair averages.
    let n_walks = credit_sets.len() as f64;
    let mut values = vec![0.0f64; d];
    for set in &credit_sets {
        for (j, &(fwd, bwd)) in set.iter().enumerate() {
            values[j] += 0.5 * (fwd + bwd);
        }
    }
    for v in values.iter_mut() {
        *v /= n_walks;
    }
    let mut std_error = vec![0.0f64; d];
    for set in &credit_sets {
        for (j, &(fwd, bwd)) in set.iter().enumerate() {
            std_error[j] += (0.5 * (fwd + bwd) - values[j]).powi(2);
        }
    }
    for se in std_error.iter_mut() {
        *se = (*se / n_walks).sqrt() / n_walks.sqrt();
    }
    Ok(Attribution {
        values,
        base_value,
        output,
        std_error,
    })
}

/// Telescoping check for a single permutation walk: credits along one
/// forward pass sum exactly to `f(x) - f(background_row)`.
pub fn forward_walk_telescopes<F>(model: &F, x: &[f64], bg: &[f64], order: &[usize]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut z = bg.to_vec();
    let start = model(&z);
    let mut sum = 0.0;
    let mut prev = start;
    for &f in order {
        z[f] = x[f];
        let cur = model(&z);
        sum += cur - prev;
        prev = cur;
    }
    (sum - (model(x) - start)).abs()
}

/// Exact Shapley values by full subset enumeration (at most 12 features).
pub fn exact_shap<F>(model: &F, x: &[f64], background: &DenseMatrix) -> Result<Attribution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = x.len();
    if d > 12 {
        return Err(Error::Explain(format!(
            "{d} features exceed the exact enumerator's limit of 12; use the permutation sampler"
        )));
    }
    if background.n_rows == 0 {
        return Err(Error::Explain("background must be nonempty".into()));
    }
    if background.n_cols != d {
        return Err(Error::Explain(
            "background width differs from the explained point".into(),
        ));
    }
    let n_subsets = 1usize << d;
    // v(S) = mean over background rows of f(x_S, b_rest).
    let v: Vec<f64> = (0..n_subsets)
        .into_par_iter()
        .map(|mask| {
            let mut total = 0.0;
            for b in 0..background.n_rows {
                let bg = background.row(b);
                let z: Vec<f64> = (0..d)
                    .map(|j| if mask >> j & 1 == 1 { x[j] } else { bg[j] })
                    .collect();
                total += model(&z);
            }
            total / background.n_rows as f64
        })
        .collect();

    // Shapley kernel weights: |S|! (d - |S| - 1)! / d!.
    let mut fact = vec![1.0f64; d + 1];
    for i in 1..=d {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut values = vec![0.0f64; d];
    for (j, value) in values.iter_mut().enumerate() {
        for mask in 0..n_subsets {
            if mask >> j & 1 == 1 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            let w = fact[s] * fact[d - s - 1] / fact[d];
            *value += w * (v[mask | (1 << j)] - v[mask]);
        }
    }
    Ok(Attribution {
        values,
        base_value: v[0],
        output: v[n_subsets - 1],
        std_error: vec![0.0; d],
    })
}

/// Global importance: mean |phi| and its spread across explained samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub feature_names: Vec<String>,
    pub mean_abs: Vec<f64>,
    /// Population standard deviation of |phi| across samples.
    pub std_abs: Vec<f64>,
    pub n_samples: usize,
}

impl GlobalImportance {
    /// Feature indices sorted by descending mean |phi|.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.mean_abs.len()).collect();
        idx.sort_by(|&a, &b| {
            self.mean_abs[b]
                .partial_cmp(&self.mean_abs[a])
                .unwrap()
                .then_with(|| self.feature_names[a].cmp(&self.feature_names[b]))
        });
        idx
    }
}

/// Aggregates attributions into global mean-|phi| importances.
pub fn aggregate_global(
    attributions: &[Attribution],
    feature_names: &[String],
) -> Result<GlobalImportance> {
    if attributions.is_empty() {
        return Err(Error::Explain("no attributions to aggregate".into()));
    }
    let d = feature_names.len();
    if attributions.iter().any(|a| a.values.len() != d) {
        return Err(Error::Explain("attribution feature schema mismatch".into()));
    }
    let n = attributions.len() as f64;
    let mut mean_abs = vec![0.0f64; d];
    for a in attributions {
        for (m, &v) in mean_abs.iter_mut().zip(&a.values) {
            *m += v.abs();
        }
    }
    for m in mean_abs.iter_mut() {
        *m /= n;
    }
    let mut std_abs = vec![0.0f64; d];
    for a in attributions {
        for ((s, &v), &m) in std_abs.iter_mut().zip(&a.values).zip(&mean_abs) {
            *s += (v.abs() - m) * (v.abs() - m);
        }
    }
    for s in std_abs.iter_mut() {
        *s = (*s / n).sqrt();
    }
    Ok(GlobalImportance {
        feature_names: feature_names.to_vec(),
        mean_abs,
        std_abs,
        n_samples: attributions.len(),
    })
}

/// One row of beeswarm plot data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeeswarmRow {
    pub sample_index: usize,
    pub feature: String,
    pub phi: f64,
    pub raw_value: f64,
}

/// Flattens attributions plus raw feature values into beeswarm rows.
pub fn export_beeswarm(
    attributions: &[Attribution],
    raw_rows: &DenseMatrix,
    feature_names: &[String],
) -> Result<Vec<BeeswarmRow>> {
    if attributions.len() != raw_rows.n_rows {
        return Err(Error::Explain("attribution/raw row count mismatch".into()));
    }
    let d = feature_names.len();
    if attributions.iter().any(|a| a.values.len() != d) || raw_rows.n_cols != d {
        return Err(Error::Explain("attribution feature schema mismatch".into()));
    }
    let mut rows = Vec::with_capacity(attributions.len() * d);
    for (i, a) in attributions.iter().enumerate() {
        for (j, name) in feature_names.iter().enumerate() {
            rows.push(BeeswarmRow {
                sample_index: i,
                feature: name.clone(),
                phi: a.values[j],
                raw_value: raw_rows.get(i, j),
            });
        }
    }
    Ok(rows)
}
