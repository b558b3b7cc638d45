//! Isotonic regression via pool-adjacent-violators, for monotone
//! non-decreasing probability calibration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted step function: increasing score thresholds with block values in
/// [0, 1]; out-of-range scores clamp to the boundary blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsotonicMap {
    /// Sorted distinct scores at block boundaries.
    pub scores: Vec<f64>,
    /// Fitted value at each score; non-decreasing.
    pub values: Vec<f64>,
}

/// Pool-adjacent-violators fit of labels on scores, minimizing squared
/// error under the monotone non-decreasing constraint. Ties in score are
/// pooled before fitting.
pub fn fit_isotonic(scores: &[f64], y: &[u8]) -> Result<IsotonicMap> {
    if scores.len() != y.len() {
        return Err(Error::Calibration("score/label length mismatch".into()));
    }
    if scores.len() < 2 {
        return Err(Error::Calibration(
            "isotonic fit needs at least 2 samples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("non-finite score"));

    // Pool exact score ties first.
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for &i in &order {
        if xs.last() == Some(&scores[i]) {
            let k = xs.len() - 1;
            ys[k] = (ys[k] * ws[k] + y[i] as f64) / (ws[k] + 1.0);
            ws[k] += 1.0;
        } else {
            xs.push(scores[i]);
            ys.push(y[i] as f64);
            ws.push(1.0);
        }
    }

    // PAVA: merge adjacent blocks while a later block undercuts an earlier one.
    struct Block {
        value: f64,
        weight: f64,
        count: usize,
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(xs.len());
    for (v, w) in ys.iter().zip(&ws) {
        blocks.push(Block {
            value: *v,
            weight: *w,
            count: 1,
        });
        while blocks.len() >= 2 {
            let last = blocks.len() - 1;
            if blocks[last - 1].value <= blocks[last].value + 1e-15 {
                break;
            }
            let b = blocks.pop().unwrap();
            let a = blocks.last_mut().unwrap();
            a.value = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
            a.weight += b.weight;
            a.count += b.count;
        }
    }

    let mut values = Vec::with_capacity(xs.len());
    for b in &blocks {
        for _ in 0..b.count {
            values.push(b.value.clamp(0.0, 1.0));
        }
    }
    Ok(IsotonicMap { scores: xs, values })
}

/// Evaluates the fitted map on new scores via stepwise interpolation:
/// each score maps to the fitted value of the last breakpoint at or below
/// it, clamping at the extremes.
pub fn apply_isotonic(map: &IsotonicMap, scores: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| {
            if s <= map.scores[0] {
                return map.values[0];
            }
            if s >= *map.scores.last().unwrap() {
                return *map.values.last().unwrap();
            }
            // Last index with breakpoint score <= s.
            let idx = map.scores.partition_point(|&x| x <= s) - 1;
            map.values[idx]
        })
        .collect()
}
