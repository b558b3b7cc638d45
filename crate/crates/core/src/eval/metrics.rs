//! Discrimination metrics.
//!
//! The positive class is `transplanted` (label 1). Probability ties at the
//! decision threshold resolve to the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Thresholds predicted probabilities against true labels (1 = positive).
pub fn confusion(y_true: &[u8], p_pred: &[f64], threshold: f64) -> Result<ConfusionCounts> {
    if y_true.is_empty() {
        return Err(Error::Metric("empty input".into()));
    }
    if y_true.len() != p_pred.len() {
        return Err(Error::Metric("label/prediction length mismatch".into()));
    }
    let mut c = ConfusionCounts {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
    };
    for (&y, &p) in y_true.iter().zip(p_pred) {
        let pos = p >= threshold;
        match (y != 0, pos) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// F1 score; 0 when the denominator 2TP+FP+FN is zero.
pub fn f1(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    }
}

/// Matthews correlation coefficient; 0 when any marginal is zero.
pub fn mcc(c: &ConfusionCounts) -> f64 {
    let tp = c.tp as f64;
    let tn = c.tn as f64;
    let fp = c.fp as f64;
    let fn_ = c.fn_ as f64;
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / denom.sqrt()
    }
}

/// Normed MCC, `(MCC + 1) / 2`, mapping to [0, 1].
pub fn normed_mcc(c: &ConfusionCounts) -> f64 {
    (mcc(c) + 1.0) / 2.0
}

/// Rank-based (Mann-Whitney) AUC with average ranks for tied scores.
pub fn auc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::Metric("label/score length mismatch".into()));
    }
    let n_pos = y_true.iter().filter(|&&y| y != 0).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("auc requires both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("non-finite score"));
    // Average ranks over tie groups (1-based ranks).
    let mut rank = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &order[i..=j] {
            rank[k] = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = y_true
        .iter()
        .zip(&rank)
        .filter(|(&y, _)| y != 0)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
