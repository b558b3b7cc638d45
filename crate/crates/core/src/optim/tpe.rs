//! Tree-structured Parzen Estimator optimization over a hyperparameter
//! space: random startup trials, then candidates drawn from the density of
//! good trials and ranked by the good/bad density ratio.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::special::normal_cdf;
use crate::models::{HpAssignment, HpValue, HyperParamSpace, ParamDomain};
use crate::rng;

use super::ledger::{TrialKind, TrialLedger, TrialRecord, FAILED_TRIAL_LOSS};

const SALT_TPE: u64 = 0x79e;

#[derive(Debug, Clone)]
pub struct TpeConfig {
    pub n_trials: usize,
    /// Quantile splitting good from bad trials.
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            n_trials: 300,
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
            seed: 0,
        }
    }
}

/// One objective evaluation: the loss plus optional per-fold scores for
/// the ledger.
#[derive(Debug, Clone)]
pub struct TpeEval {
    pub loss: f64,
    pub fold_scores: Vec<f64>,
}

impl TpeEval {
    pub fn loss_only(loss: f64) -> TpeEval {
        TpeEval {
            loss,
            fold_scores: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TpeOutcome {
    pub best_point: HpAssignment,
    pub best_loss: f64,
    pub ledger: TrialLedger,
}

/// Per-parameter kernel density over observed values.
enum ParamDensity {
    Numeric {
        lo: f64,
        hi: f64,
        log: bool,
        int: bool,
        /// Component centers in (possibly log-) transformed space.
        centers: Vec<f64>,
        widths: Vec<f64>,
    },
    Categorical {
        choices: Vec<String>,
        /// Smoothed probabilities.
        probs: Vec<f64>,
    },
}

fn transform(v: f64, log: bool) -> f64 {
    if log {
        v.ln()
    } else {
        v
    }
}

fn back_transform(v: f64, log: bool) -> f64 {
    if log {
        v.exp()
    } else {
        v
    }
}

impl ParamDensity {
    fn fit(domain: &ParamDomain, values: &[&HpValue]) -> ParamDensity {
        match domain {
            ParamDomain::Cat { choices } => {
                let mut counts = vec![0.0f64; choices.len()];
                for v in values {
                    if let Some(s) = v.as_cat() {
                        if let Some(i) = choices.iter().position(|c| c == s) {
                            counts[i] += 1.0;
                        }
                    }
                }
                let total: f64 = counts.iter().sum::<f64>() + choices.len() as f64;
                let probs = counts.iter().map(|c| (c + 1.0) / total).collect();
                ParamDensity::Categorical {
                    choices: choices.clone(),
                    probs,
                }
            }
            ParamDomain::Int { lo, hi } => {
                Self::fit_numeric(*lo as f64, *hi as f64, false, true, values)
            }
            ParamDomain::Float { lo, hi, log } => Self::fit_numeric(*lo, *hi, *log, false, values),
        }
    }

    fn fit_numeric(lo: f64, hi: f64, log: bool, int: bool, values: &[&HpValue]) -> ParamDensity {
        let t_lo = transform(lo, log);
        let t_hi = transform(hi, log);
        let range = (t_hi - t_lo).max(1e-12);
        let mut centers: Vec<f64> = values
            .iter()
            .filter_map(|v| v.as_float())
            .map(|v| transform(v.clamp(lo, hi), log))
            .collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Bandwidth per component: distance to the farther neighbor,
        // clamped; lone points fall back to the full range.
        let n = centers.len();
        let min_w = range / 100.0_f64.min((n as f64).max(2.0) * 5.0);
        let widths: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 {
                    centers[i] - centers[i - 1]
                } else {
                    range
                };
                let right = if i + 1 < n {
                    centers[i + 1] - centers[i]
                } else {
                    range
                };
                left.max(right).clamp(min_w, range)
            })
            .collect();
        ParamDensity::Numeric {
            lo: t_lo,
            hi: t_hi,
            log,
            int,
            centers,
            widths,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> HpValue {
        match self {
            ParamDensity::Categorical { choices, probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (c, p) in choices.iter().zip(probs) {
                    acc += p;
                    if u <= acc {
                        return HpValue::Cat(c.clone());
                    }
                }
                HpValue::Cat(choices.last().unwrap().clone())
            }
            ParamDensity::Numeric {
                lo,
                hi,
                log,
                int,
                centers,
                widths,
            } => {
                // Mixture: uniform prior component plus one kernel per
                // observation.
                let k = centers.len();
                let pick = rng.gen_range(0..=k);
                let t = if pick == k || k == 0 {
                    rng.gen_range(*lo..=*hi)
                } else {
                    // Truncated Gaussian by rejection, clamped after 100 draws.
                    let mu = centers[pick];
                    let sd = widths[pick];
                    let mut value = None;
                    for _ in 0..100 {
                        let draw = mu + sd * rng::standard_normal(rng);
                        if draw >= *lo && draw <= *hi {
                            value = Some(draw);
                            break;
                        }
                    }
                    value.unwrap_or_else(|| (mu + sd * rng::standard_normal(rng)).clamp(*lo, *hi))
                };
                let raw = back_transform(t, *log);
                if *int {
                    HpValue::Int(raw.round() as i64)
                } else {
                    HpValue::Float(raw)
                }
            }
        }
    }

    fn log_pdf(&self, value: &HpValue) -> f64 {
        match self {
            ParamDensity::Categorical { choices, probs } => value
                .as_cat()
                .and_then(|s| choices.iter().position(|c| c == s))
                .map(|i| probs[i].ln())
                .unwrap_or(f64::NEG_INFINITY),
            ParamDensity::Numeric {
                lo,
                hi,
                log,
                int: _,
                centers,
                widths,
            } => {
                let Some(raw) = value.as_float() else {
                    return f64::NEG_INFINITY;
                };
                let x = transform(raw.max(1e-300), *log).clamp(*lo, *hi);
                let range = (hi - lo).max(1e-12);
                // Uniform prior component weight 1/(k+1).
                let k = centers.len();
                let mut density = 1.0 / range;
                for (mu, sd) in centers.iter().zip(widths) {
                    let z = (x - mu) / sd;
                    let norm = normal_cdf((hi - mu) / sd) - normal_cdf((lo - mu) / sd);
                    if norm > 0.0 {
                        let pdf = (-0.5 * z * z).exp()
                            / (sd * (2.0 * std::f64::consts::PI).sqrt())
                            / norm;
                        density += pdf;
                    }
                }
                (density / (k as f64 + 1.0)).max(1e-300).ln()
            }
        }
    }
}

/// Runs the TPE loop. The objective may fail or return a non-finite loss;
/// such trials are recorded as failures with the sentinel loss and the
/// search continues.
pub fn tpe_optimize<F>(
    space: &HyperParamSpace,
    mut objective: F,
    config: &TpeConfig,
) -> Result<TpeOutcome>
where
    F: FnMut(&HpAssignment, usize) -> Result<TpeEval>,
{
    if config.n_trials < 1 {
        return Err(Error::Search("n_trials must be at least 1".into()));
    }
    if space.params.is_empty() {
        return Err(Error::Search("empty hyperparameter space".into()));
    }
    let mut ledger = TrialLedger::new();
    let mut history: Vec<(HpAssignment, f64)> = Vec::new();

    for trial in 0..config.n_trials {
        let mut trial_rng = rng::stream(config.seed, SALT_TPE, trial as u64);
        let point = if trial < config.n_startup || history.len() < 2 {
            space.sample(&mut trial_rng)
        } else {
            propose(space, &history, config, &mut trial_rng)
        };

        let start = std::time::Instant::now();
        let eval = objective(&point, trial);
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let (loss, fold_scores, failed) = match eval {
            Ok(e) if e.loss.is_finite() => (e.loss, e.fold_scores, false),
            Ok(_) => (FAILED_TRIAL_LOSS, Vec::new(), true),
            Err(_) => (FAILED_TRIAL_LOSS, Vec::new(), true),
        };
        ledger.push(TrialRecord {
            index: 0,
            kind: TrialKind::HpPoint,
            genome: None,
            hp: Some(point.clone()),
            fold_scores,
            penalty: 0.0,
            total_loss: loss,
            failed,
            wall_time_ms: ms,
        });
        history.push((point, loss));
    }

    let best = ledger
        .best()
        .ok_or_else(|| Error::Search("every trial failed".into()))?;
    Ok(TpeOutcome {
        best_point: best.hp.clone().expect("hp trial"),
        best_loss: best.total_loss,
        ledger: ledger.clone(),
    })
}

/// Splits the history at the gamma quantile, fits per-parameter densities,
/// and returns the candidate maximizing the good/bad density ratio.
fn propose(
    space: &HyperParamSpace,
    history: &[(HpAssignment, f64)],
    config: &TpeConfig,
    rng: &mut ChaCha8Rng,
) -> HpAssignment {
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|&a, &b| history[a].1.partial_cmp(&history[b].1).unwrap());
    let n_good =
        ((config.gamma * history.len() as f64).ceil() as usize).clamp(1, history.len() - 1);
    let good: Vec<usize> = order[..n_good].to_vec();
    let bad: Vec<usize> = order[n_good..].to_vec();

    let mut good_densities = Vec::with_capacity(space.params.len());
    let mut bad_densities = Vec::with_capacity(space.params.len());
    for (name, domain) in &space.params {
        let good_vals: Vec<&HpValue> = good.iter().map(|&i| &history[i].0[name]).collect();
        let bad_vals: Vec<&HpValue> = bad.iter().map(|&i| &history[i].0[name]).collect();
        good_densities.push((name.clone(), ParamDensity::fit(domain, &good_vals)));
        bad_densities.push(ParamDensity::fit(domain, &bad_vals));
    }

    let mut best: Option<(f64, HpAssignment)> = None;
    for _ in 0..config.n_candidates {
        let mut candidate = HpAssignment::new();
        let mut score = 0.0;
        for ((name, gd), bd) in good_densities.iter().zip(&bad_densities) {
            let v = gd.sample(rng);
            score += gd.log_pdf(&v) - bd.log_pdf(&v);
            candidate.insert(name.clone(), v);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, candidate));
        }
    }
    best.expect("n_candidates >= 1").1
}
