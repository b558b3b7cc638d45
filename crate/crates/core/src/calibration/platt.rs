//! Platt scaling: a two-parameter logistic map from raw scores to
//! probabilities, fitted by Newton iterations on the smoothed targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted sigmoid parameters: p = 1 / (1 + exp(-(a*s + b))).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Maximum-likelihood fit of the sigmoid on validation scores, with the
/// usual smoothed targets t+ = (N+ + 1)/(N+ + 2) and t- = 1/(N- + 2).
pub fn fit_platt(raw_scores: &[f64], y: &[u8]) -> Result<PlattParams> {
    if raw_scores.len() != y.len() || raw_scores.is_empty() {
        return Err(Error::Calibration(
            "empty or mismatched calibration data".into(),
        ));
    }
    let n_pos = y.iter().filter(|&&v| v != 0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Calibration(
            "calibration data needs both classes".into(),
        ));
    }
    let first = raw_scores[0];
    if raw_scores.iter().all(|&s| s == first) {
        return Err(Error::Calibration(
            "all raw scores identical; sigmoid slope unidentifiable".into(),
        ));
    }

    let t_pos = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let t_neg = 1.0 / (n_neg as f64 + 2.0);
    let targets: Vec<f64> = y
        .iter()
        .map(|&yi| if yi != 0 { t_pos } else { t_neg })
        .collect();

    // Newton iterations on (a, b); the negative log likelihood is convex.
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    let mut converged = false;
    let mut last_step = f64::INFINITY;
    for _ in 0..100 {
        let mut g_a = 0.0;
        let mut g_b = 0.0;
        let mut h_aa = 0.0;
        let mut h_ab = 0.0;
        let mut h_bb = 0.0;
        for (&s, &t) in raw_scores.iter().zip(&targets) {
            let p = sigmoid(a * s + b);
            let d = p - t;
            let w = (p * (1.0 - p)).max(1e-12);
            g_a += d * s;
            g_b += d;
            h_aa += w * s * s;
            h_ab += w * s;
            h_bb += w;
        }
        // Small ridge keeps the 2x2 solve well posed.
        h_aa += 1e-12;
        h_bb += 1e-12;
        let det = h_aa * h_bb - h_ab * h_ab;
        if det.abs() < 1e-300 {
            return Err(Error::Calibration("singular Hessian in sigmoid fit".into()));
        }
        let da = (g_a * h_bb - g_b * h_ab) / det;
        let db = (g_b * h_aa - g_a * h_ab) / det;
        a -= da;
        b -= db;
        last_step = da.abs().max(db.abs());
        if last_step < 1e-10 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Calibration(format!(
            "sigmoid fit did not converge in 100 iterations (last iterate a={a}, b={b}, step={last_step})"
        )));
    }
    Ok(PlattParams { a, b })
}

/// Applies fitted parameters to raw scores.
pub fn apply_platt(params: &PlattParams, raw_scores: &[f64]) -> Vec<f64> {
    raw_scores
        .iter()
        .map(|&s| sigmoid(params.a * s + params.b))
        .collect()
}
