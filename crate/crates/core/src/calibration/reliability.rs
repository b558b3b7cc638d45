//! Reliability curves and the exact two-term Brier decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One occupied probability bin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub bin_index: usize,
    pub lo: f64,
    pub hi: f64,
    pub mean_predicted: f64,
    pub fraction_positive: f64,
    pub count: usize,
}

/// Binned calibration curve over equal-width bins on [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReliabilityCurve {
    pub n_bins: usize,
    /// Occupied bins only; empty ones are reported separately.
    pub bins: Vec<ReliabilityBin>,
    pub empty_bins: Vec<usize>,
}

/// Builds the reliability curve with `n_bins` equal-width bins.
pub fn reliability_curve(p_pred: &[f64], y_true: &[u8], n_bins: usize) -> Result<ReliabilityCurve> {
    if p_pred.is_empty() || p_pred.len() != y_true.len() {
        return Err(Error::Calibration("empty or mismatched input".into()));
    }
    if n_bins == 0 {
        return Err(Error::Calibration("n_bins must be at least 1".into()));
    }
    let mut sums = vec![(0.0f64, 0usize, 0usize); n_bins]; // (sum p, positives, count)
    for (&p, &y) in p_pred.iter().zip(y_true) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Calibration(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        sums[b].0 += p;
        sums[b].1 += (y != 0) as usize;
        sums[b].2 += 1;
    }
    let mut bins = Vec::new();
    let mut empty_bins = Vec::new();
    for (i, (sum_p, pos, count)) in sums.into_iter().enumerate() {
        if count == 0 {
            empty_bins.push(i);
        } else {
            bins.push(ReliabilityBin {
                bin_index: i,
                lo: i as f64 / n_bins as f64,
                hi: (i + 1) as f64 / n_bins as f64,
                mean_predicted: sum_p / count as f64,
                fraction_positive: pos as f64 / count as f64,
                count,
            });
        }
    }
    Ok(ReliabilityCurve {
        n_bins,
        bins,
        empty_bins,
    })
}

/// Two-term Brier decomposition over the curve's bins. `refinement` is the
/// Brier score of the within-bin recalibrated forecast (the bin outcome
/// rate); `calibration` is the improvement that recalibration would give.
/// The two recombine to the Brier score exactly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BrierDecomposition {
    pub calibration: f64,
    pub refinement: f64,
}

pub fn brier_decomposition(
    p_pred: &[f64],
    y_true: &[u8],
    n_bins: usize,
) -> Result<BrierDecomposition> {
    if p_pred.is_empty() || p_pred.len() != y_true.len() {
        return Err(Error::Calibration("empty or mismatched input".into()));
    }
    // Bin assignment identical to the reliability curve's.
    let mut pos = vec![0usize; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, &y) in p_pred.iter().zip(y_true) {
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        pos[b] += (y != 0) as usize;
        count[b] += 1;
    }
    let n = p_pred.len() as f64;
    let mut refinement = 0.0;
    for b in 0..n_bins {
        if count[b] > 0 {
            let rate = pos[b] as f64 / count[b] as f64;
            refinement += count[b] as f64 * rate * (1.0 - rate);
        }
    }
    refinement /= n;
    let mut calibration = 0.0;
    for (&p, &y) in p_pred.iter().zip(y_true) {
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        let rate = pos[b] as f64 / count[b] as f64;
        let yf = y as f64;
        calibration += (p - yf) * (p - yf) - (rate - yf) * (rate - yf);
    }
    calibration /= n;
    Ok(BrierDecomposition {
        calibration,
        refinement,
    })
}
