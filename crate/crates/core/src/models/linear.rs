//! Elastic-net logistic regression fitted by a SAGA-style stochastic
//! incremental-gradient solver with a proximal L1 step.
//!
//! Objective: mean logistic loss + (1/C) * [l1_ratio*|w|_1 +
//! (1-l1_ratio)/2*|w|_2^2], intercept unpenalized. The seed drives the
//! per-epoch sample order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

use super::space::HpAssignment;
use super::{ModelFamily, ProbabilisticClassifier};

const SALT_SAGA: u64 = 0x5a6a;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegParams {
    pub c: f64,
    pub l1_ratio: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_epochs() -> usize {
    200
}

impl LogRegParams {
    pub fn new(c: f64, l1_ratio: f64) -> LogRegParams {
        LogRegParams {
            c,
            l1_ratio,
            tol: default_tol(),
            max_epochs: default_max_epochs(),
        }
    }

    pub fn from_hp(hp: &HpAssignment) -> Result<LogRegParams> {
        let c = hp
            .get("C")
            .and_then(|v| v.as_float())
            .ok_or_else(|| Error::ModelConfig("missing hyperparameter 'C'".into()))?;
        let l1_ratio = hp
            .get("l1_ratio")
            .and_then(|v| v.as_float())
            .ok_or_else(|| Error::ModelConfig("missing hyperparameter 'l1_ratio'".into()))?;
        let params = LogRegParams::new(c, l1_ratio);
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c <= 0.0 || self.c.is_nan() {
            return Err(Error::ModelConfig("C must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::ModelConfig("l1_ratio must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub params: LogRegParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub epochs_run: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn fit_logreg_elasticnet(
    x: &DenseMatrix,
    y: &[u8],
    params: &LogRegParams,
    seed: u64,
    feature_names: Vec<String>,
) -> Result<LogRegModel> {
    params.validate()?;
    let n = x.n_rows;
    let d = x.n_cols;
    if n == 0 || n != y.len() {
        return Err(Error::ModelConfig(
            "empty or mismatched training data".into(),
        ));
    }
    let lam1 = params.l1_ratio / params.c;
    let lam2 = (1.0 - params.l1_ratio) / params.c;

    // Step size from the smooth part's Lipschitz constant (logistic curvature
    // is at most 1/4; the intercept coordinate adds 1 to the row norm).
    let max_row_sq = (0..n)
        .map(|r| x.row(r).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(0.0f64, f64::max);
    let step = 1.0 / (3.0 * (0.25 * max_row_sq + lam2).max(1e-12));

    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    // SAGA gradient memory: phi_i = sigma(z_i) - y_i at the last visit.
    let mut phi = vec![0.0f64; n];
    let mut g_avg = vec![0.0f64; d];
    let mut g_avg_b = 0.0f64;
    for i in 0..n {
        let yi = y[i] as f64;
        let p0 = 0.5; // z = 0 initially
        phi[i] = p0 - yi;
        for (j, &v) in x.row(i).iter().enumerate() {
            g_avg[j] += phi[i] * v;
        }
        g_avg_b += phi[i];
    }
    let inv_n = 1.0 / n as f64;
    for g in g_avg.iter_mut() {
        *g *= inv_n;
    }
    g_avg_b *= inv_n;

    let mut rng = rng::stream(seed, SALT_SAGA, 0);
    let mut epochs_run = 0;
    for epoch in 0..params.max_epochs {
        epochs_run = epoch + 1;
        let w_before = w.clone();
        let b_before = b;
        let order = rng::shuffled_indices(n, &mut rng);
        for &i in &order {
            let row = x.row(i);
            let z = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            let phi_new = sigmoid(z) - y[i] as f64;
            let delta = phi_new - phi[i];
            phi[i] = phi_new;
            for j in 0..d {
                let grad_j = delta * row[j] + g_avg[j] + lam2 * w[j];
                let cand = w[j] - step * grad_j;
                w[j] = soft_threshold(cand, step * lam1);
                g_avg[j] += delta * row[j] * inv_n;
            }
            let grad_b = delta + g_avg_b;
            b -= step * grad_b;
            g_avg_b += delta * inv_n;
        }
        let max_w = w.iter().fold(1.0f64, |m, v| m.max(v.abs())).max(b.abs());
        let max_delta = w
            .iter()
            .zip(&w_before)
            .map(|(a, c)| (a - c).abs())
            .fold((b - b_before).abs(), f64::max);
        if max_delta / max_w < params.tol {
            break;
        }
    }

    Ok(LogRegModel {
        weights: w,
        intercept: b,
        params: params.clone(),
        seed,
        feature_names,
        epochs_run,
    })
}

impl ProbabilisticClassifier for LogRegModel {
    fn family(&self) -> ModelFamily {
        ModelFamily::LogisticRegression
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }

    fn raw_score(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn vanishing_penalty_separates_two_points() {
        let x = DenseMatrix::from_rows(&[vec![-2.0], vec![2.0]]);
        let y = [0u8, 1];
        let params = LogRegParams::new(1e9, 0.5);
        let m = fit_logreg_elasticnet(&x, &y, &params, 0, vec![]).unwrap();
        assert!(m.predict_proba(&[-2.0]) < 0.1);
        assert!(m.predict_proba(&[2.0]) > 0.9);
        assert_eq!(m.predict_label(&[-2.0]), 0);
        assert_eq!(m.predict_label(&[2.0]), 1);
    }

    #[test]
    fn full_shrinkage_gives_exact_zero_weights_and_prior() {
        let mut rng = crate::rng::from_seed(2);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let y: Vec<u8> = (0..80).map(|i| (i % 4 == 0) as u8).collect(); // prior 0.25
        let x = DenseMatrix::from_rows(&rows);
        let params = LogRegParams::new(1e-6, 1.0);
        let m = fit_logreg_elasticnet(&x, &y, &params, 1, vec![]).unwrap();
        assert!(
            m.weights.iter().all(|&w| w == 0.0),
            "weights {:?}",
            m.weights
        );
        let p = m.predict_proba(&[0.3, 0.7]);
        assert!((p - 0.25).abs() < 0.02, "prior prediction {p}");
    }

    #[test]
    fn published_best_config_accepted() {
        let params = LogRegParams::new(0.07085, 0.88392);
        params.validate().unwrap();
    }

    #[test]
    fn config_errors() {
        assert!(LogRegParams::new(0.0, 0.5).validate().is_err());
        assert!(LogRegParams::new(-1.0, 0.5).validate().is_err());
        assert!(LogRegParams::new(1.0, 1.5).validate().is_err());
    }

    #[test]
    fn seeded_reproducibility() {
        let mut rng = crate::rng::from_seed(8);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| (r[0] - r[2] > 0.0) as u8).collect();
        let x = DenseMatrix::from_rows(&rows);
        let params = LogRegParams::new(1.0, 0.3);
        let a = fit_logreg_elasticnet(&x, &y, &params, 5, vec![]).unwrap();
        let b = fit_logreg_elasticnet(&x, &y, &params, 5, vec![]).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.intercept, b.intercept);
    }

    #[test]
    fn learns_logistic_signal() {
        // y ~ Bernoulli(sigmoid(2 x1 - x2)); fitted weights should point the
        // same way and achieve decent training accuracy.
        let mut rng = crate::rng::from_seed(33);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                vec![
                    crate::rng::standard_normal(&mut rng),
                    crate::rng::standard_normal(&mut rng),
                ]
            })
            .collect();
        let y: Vec<u8> = rows
            .iter()
            .map(|r| {
                let p = sigmoid(2.0 * r[0] - r[1]);
                (rng.gen::<f64>() < p) as u8
            })
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let params = LogRegParams::new(100.0, 0.2);
        let m = fit_logreg_elasticnet(&x, &y, &params, 7, vec![]).unwrap();
        assert!(m.weights[0] > 1.0, "w0 {}", m.weights[0]);
        assert!(m.weights[1] < -0.3, "w1 {}", m.weights[1]);
        let acc = (0..x.n_rows)
            .filter(|&r| m.predict_label(x.row(r)) == y[r])
            .count() as f64
            / x.n_rows as f64;
        assert!(acc > 0.75, "accuracy {acc}");
    }
}
