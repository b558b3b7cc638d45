//! Probability calibration: Brier scoring, Platt scaling, isotonic
//! regression via pool-adjacent-violators, and reliability curves.
//!
//! Calibrators fit on validation predictions only and are then applied to
//! test predictions.

pub mod isotonic;
pub mod platt;
pub mod reliability;

use crate::error::{Error, Result};

pub use isotonic::{apply_isotonic, fit_isotonic, IsotonicMap};
pub use platt::{apply_platt, fit_platt, PlattParams};
pub use reliability::{
    brier_decomposition, reliability_curve, BrierDecomposition, ReliabilityCurve,
};

/// Brier score: mean squared error between predicted probabilities and
/// binary outcomes. Lower is better.
pub fn brier(p_pred: &[f64], y_true: &[u8]) -> Result<f64> {
    if p_pred.is_empty() {
        return Err(Error::Calibration("empty input".into()));
    }
    if p_pred.len() != y_true.len() {
        return Err(Error::Calibration(
            "prediction/label length mismatch".into(),
        ));
    }
    let sum: f64 = p_pred
        .iter()
        .zip(y_true)
        .map(|(&p, &y)| {
            let d = p - y as f64;
            d * d
        })
        .sum();
    Ok(sum / p_pred.len() as f64)
}
