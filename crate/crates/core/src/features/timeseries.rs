//! Time-series variable classification and per-donor feature extraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{DonorRecord, RawValue, TimePoint};
use crate::error::{Error, Result};

/// Subtype of a recorded variable, decided on training donors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeSeriesKind {
    /// Categorical values indicating a positive or negative outcome only.
    Type1PosNeg,
    /// Numeric values, mean observations per donor below two.
    Type2Sparse,
    /// Numeric values, mean observations per donor of two or more.
    Type3Dense,
    /// More than half of the donors have a single recorded value.
    NotTimeSeries,
}

/// Tokens accepted as negative/positive outcomes for Type-1 series.
pub const NEGATIVE_TOKENS: [&str; 3] = ["neg", "negative", "negativ"];
pub const POSITIVE_TOKENS: [&str; 3] = ["pos", "positive", "positiv"];

fn is_negative(s: &str) -> bool {
    NEGATIVE_TOKENS.iter().any(|t| s.eq_ignore_ascii_case(t))
}

fn is_positive(s: &str) -> bool {
    POSITIVE_TOKENS.iter().any(|t| s.eq_ignore_ascii_case(t))
}

/// Classifies every time-series variable appearing in the training donors.
pub fn classify_variables(
    train_records: &[&DonorRecord],
) -> Result<BTreeMap<String, TimeSeriesKind>> {
    if train_records.is_empty() {
        return Err(Error::Feature("empty training cohort".into()));
    }
    let mut per_var: BTreeMap<String, (usize, usize, usize, usize, usize)> = BTreeMap::new();
    // (donors, observations, donors_with_single_value, numeric_points, categorical_points)
    for rec in train_records {
        for (name, points) in &rec.timeseries {
            if points.is_empty() {
                continue;
            }
            let entry = per_var.entry(name.clone()).or_default();
            entry.0 += 1;
            entry.1 += points.len();
            if points.len() == 1 {
                entry.2 += 1;
            }
            for (_, v) in points {
                match v {
                    RawValue::Num(_) => entry.3 += 1,
                    RawValue::Cat(_) => entry.4 += 1,
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for (name, (donors, obs, single, num_pts, cat_pts)) in per_var {
        if num_pts > 0 && cat_pts > 0 {
            return Err(Error::VariableClass {
                name,
                reason: "mixed numeric and categorical values".into(),
            });
        }
        let kind = if single as f64 > 0.5 * donors as f64 {
            TimeSeriesKind::NotTimeSeries
        } else if cat_pts > 0 {
            TimeSeriesKind::Type1PosNeg
        } else if (obs as f64 / donors as f64) < 2.0 {
            TimeSeriesKind::Type2Sparse
        } else {
            TimeSeriesKind::Type3Dense
        };
        out.insert(name, kind);
    }
    Ok(out)
}

/// Per-donor least-squares line fit over (hours since first entry, value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub intercept: f64,
    pub slope: f64,
    pub n_points: usize,
    pub valid: bool,
}

impl TrendFit {
    pub fn invalid(n_points: usize) -> TrendFit {
        TrendFit {
            intercept: f64::NAN,
            slope: f64::NAN,
            n_points,
            valid: false,
        }
    }
}

/// Ordinary least squares on (t, y); t is re-based to the first entry and
/// simultaneous duplicate timestamps are averaged before fitting. Valid only
/// with at least two distinct time points.
pub fn fit_trend(points: &[(f64, f64)]) -> TrendFit {
    if points.is_empty() {
        return TrendFit::invalid(0);
    }
    let t0 = points[0].0;
    // Average duplicate timestamps.
    let mut merged: Vec<(f64, f64, usize)> = Vec::new();
    for &(t, y) in points {
        let t = t - t0;
        match merged.last_mut() {
            Some(last) if last.0 == t => {
                last.1 += y;
                last.2 += 1;
            }
            _ => merged.push((t, y, 1)),
        }
    }
    let pts: Vec<(f64, f64)> = merged.iter().map(|&(t, y, c)| (t, y / c as f64)).collect();
    if pts.len() < 2 {
        return TrendFit::invalid(points.len());
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut s_tt = 0.0;
    let mut s_ty = 0.0;
    for &(t, y) in &pts {
        s_tt += (t - t_mean) * (t - t_mean);
        s_ty += (t - t_mean) * (y - y_mean);
    }
    if s_tt == 0.0 {
        return TrendFit::invalid(points.len());
    }
    let slope = s_ty / s_tt;
    let intercept = y_mean - slope * t_mean;
    TrendFit {
        intercept,
        slope,
        n_points: points.len(),
        valid: true,
    }
}

/// One extracted feature value; `None` marks a missing cell.
pub type NamedFeatures = Vec<(String, Option<f64>)>;

/// Extracts the summary features of one donor's series, per the variable's
/// kind. Empty series yield all-missing features.
pub fn extract_timeseries_features(
    var_name: &str,
    points: &[TimePoint],
    kind: TimeSeriesKind,
) -> Result<NamedFeatures> {
    let mut out: NamedFeatures = Vec::new();
    let push = |out: &mut NamedFeatures, suffix: &str, v: Option<f64>| {
        out.push((format!("{var_name} {suffix}"), v));
    };

    let count = points.len();
    let span = if count >= 1 {
        Some(points[count - 1].0 - points[0].0)
    } else {
        None
    };

    match kind {
        TimeSeriesKind::Type1PosNeg => {
            let encode = |v: &RawValue| -> Result<f64> {
                match v {
                    RawValue::Cat(s) if is_negative(s) => Ok(1.0),
                    RawValue::Cat(s) if is_positive(s) => Ok(0.0),
                    other => Err(Error::VariableClass {
                        name: var_name.to_string(),
                        reason: format!("expected pos/neg value, got {other:?}"),
                    }),
                }
            };
            let first = points.first().map(|(_, v)| encode(v)).transpose()?;
            let last = points.last().map(|(_, v)| encode(v)).transpose()?;
            push(&mut out, "first value negative", first);
            push(&mut out, "last value negative", last);
            push(
                &mut out,
                "value count",
                if count > 0 { Some(count as f64) } else { None },
            );
            push(&mut out, "time span hours", span);
        }
        _ => {
            let nums: Vec<(f64, f64)> = points
                .iter()
                .map(|(t, v)| {
                    v.as_num()
                        .map(|y| (*t, y))
                        .ok_or_else(|| Error::VariableClass {
                            name: var_name.to_string(),
                            reason: format!("expected numeric value, got {v:?}"),
                        })
                })
                .collect::<Result<_>>()?;
            let first = nums.first().map(|p| p.1);
            let last = nums.last().map(|p| p.1);
            push(&mut out, "first value", first);
            push(&mut out, "last value", last);
            push(
                &mut out,
                "value count",
                if count > 0 { Some(count as f64) } else { None },
            );
            push(&mut out, "time span hours", span);

            if matches!(
                kind,
                TimeSeriesKind::Type2Sparse | TimeSeriesKind::Type3Dense
            ) {
                let std = if nums.len() >= 2 {
                    let mean = nums.iter().map(|p| p.1).sum::<f64>() / nums.len() as f64;
                    let var = nums
                        .iter()
                        .map(|p| (p.1 - mean) * (p.1 - mean))
                        .sum::<f64>()
                        / nums.len() as f64;
                    Some(var.sqrt())
                } else {
                    None
                };
                let min = nums.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                let max = nums.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                push(&mut out, "std deviation", std);
                push(
                    &mut out,
                    "min value",
                    if nums.is_empty() { None } else { Some(min) },
                );
                push(
                    &mut out,
                    "max value",
                    if nums.is_empty() { None } else { Some(max) },
                );
            }
            if kind == TimeSeriesKind::Type3Dense {
                let fit = fit_trend(&nums);
                if fit.valid {
                    push(&mut out, "intercept", Some(fit.intercept));
                    push(&mut out, "slope", Some(fit.slope));
                } else {
                    push(&mut out, "intercept", None);
                    push(&mut out, "slope", None);
                }
            }
        }
    }
    Ok(out)
}

/// Feature names this variable will produce (schema order), regardless of
/// whether a particular donor has data.
pub fn timeseries_feature_names(var_name: &str, kind: TimeSeriesKind) -> Vec<String> {
    let base: Vec<&str> = match kind {
        TimeSeriesKind::Type1PosNeg => vec![
            "first value negative",
            "last value negative",
            "value count",
            "time span hours",
        ],
        TimeSeriesKind::NotTimeSeries => {
            vec![
                "first value",
                "last value",
                "value count",
                "time span hours",
            ]
        }
        TimeSeriesKind::Type2Sparse => vec![
            "first value",
            "last value",
            "value count",
            "time span hours",
            "std deviation",
            "min value",
            "max value",
        ],
        TimeSeriesKind::Type3Dense => vec![
            "first value",
            "last value",
            "value count",
            "time span hours",
            "std deviation",
            "min value",
            "max value",
            "intercept",
            "slope",
        ],
    };
    base.iter().map(|s| format!("{var_name} {s}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::KidneyOutcome;
    use std::collections::BTreeMap;

    /// Independent oracle: solve the 2x2 normal equations by Cramer's rule
    /// on raw sums.
    fn normal_equation_fit(points: &[(f64, f64)]) -> (f64, f64) {
        let t0 = points[0].0;
        let n = points.len() as f64;
        let (mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0);
        for &(t, y) in points {
            let t = t - t0;
            st += t;
            stt += t * t;
            sy += y;
            sty += t * y;
        }
        let det = n * stt - st * st;
        let intercept = (sy * stt - st * sty) / det;
        let slope = (n * sty - st * sy) / det;
        (intercept, slope)
    }

    #[test]
    fn exact_line_recovered() {
        let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)];
        let fit = fit_trend(&pts);
        assert!(fit.valid);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_example() {
        let pts = [(0.0, 2.0), (2.0, 2.0), (4.0, 8.0)];
        let fit = fit_trend(&pts);
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations_on_random_series() {
        let mut rng = crate::rng::from_seed(21);
        use rand::Rng;
        for _ in 0..500 {
            let n = rng.gen_range(2..12);
            let mut pts: Vec<(f64, f64)> = (0..n)
                .map(|i| {
                    (
                        i as f64 + rng.gen::<f64>() * 0.5,
                        rng.gen::<f64>() * 10.0 - 5.0,
                    )
                })
                .collect();
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let fit = fit_trend(&pts);
            let (b0, b1) = normal_equation_fit(&pts);
            assert!(
                (fit.intercept - b0).abs() < 1e-9,
                "{} vs {b0}",
                fit.intercept
            );
            assert!((fit.slope - b1).abs() < 1e-9);
            // Residual orthogonality.
            let t0 = pts[0].0;
            let (mut se, mut ste) = (0.0, 0.0);
            for &(t, y) in &pts {
                let e = y - fit.intercept - fit.slope * (t - t0);
                se += e;
                ste += (t - t0) * e;
            }
            assert!(se.abs() < 1e-9 && ste.abs() < 1e-8, "se={se} ste={ste}");
        }
    }

    #[test]
    fn degenerate_single_point() {
        let fit = fit_trend(&[(5.0, 7.0)]);
        assert!(!fit.valid);
        let feats = extract_timeseries_features(
            "x",
            &[(5.0, RawValue::Num(7.0))],
            TimeSeriesKind::Type3Dense,
        )
        .unwrap();
        let get = |n: &str| {
            feats
                .iter()
                .find(|(k, _)| k == &format!("x {n}"))
                .unwrap()
                .1
        };
        assert_eq!(get("value count"), Some(1.0));
        assert_eq!(get("first value"), Some(7.0));
        assert_eq!(get("last value"), Some(7.0));
        assert_eq!(get("time span hours"), Some(0.0));
        assert_eq!(get("std deviation"), None);
        assert_eq!(get("slope"), None);
        assert_eq!(get("intercept"), None);
    }

    #[test]
    fn duplicate_timestamps_averaged() {
        // (0, 1) and (0, 3) average to (0, 2); with (2, 4): slope (4-2)/2 = 1.
        let fit = fit_trend(&[(0.0, 1.0), (0.0, 3.0), (2.0, 4.0)]);
        assert!(fit.valid);
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_series_all_missing() {
        let feats = extract_timeseries_features("x", &[], TimeSeriesKind::Type3Dense).unwrap();
        assert_eq!(feats.len(), 9);
        assert!(feats.iter().all(|(_, v)| v.is_none()));
    }

    #[test]
    fn full_extraction_example() {
        let pts = vec![
            (0.0, RawValue::Num(1.0)),
            (1.0, RawValue::Num(3.0)),
            (2.0, RawValue::Num(5.0)),
        ];
        let feats = extract_timeseries_features("y", &pts, TimeSeriesKind::Type3Dense).unwrap();
        let get = |n: &str| {
            feats
                .iter()
                .find(|(k, _)| k == &format!("y {n}"))
                .unwrap()
                .1
                .unwrap()
        };
        assert_eq!(get("first value"), 1.0);
        assert_eq!(get("last value"), 5.0);
        assert_eq!(get("value count"), 3.0);
        assert_eq!(get("time span hours"), 2.0);
        assert_eq!(get("min value"), 1.0);
        assert_eq!(get("max value"), 5.0);
        assert!((get("intercept") - 1.0).abs() < 1e-12);
        assert!((get("slope") - 2.0).abs() < 1e-12);
    }

    fn record_with(id: &str, series: &[(&str, Vec<TimePoint>)]) -> DonorRecord {
        DonorRecord {
            donor_id: id.into(),
            static_vars: BTreeMap::new(),
            timeseries: series
                .iter()
                .map(|(n, p)| (n.to_string(), p.clone()))
                .collect(),
            medications: vec![],
            kidney_outcomes: [Some(KidneyOutcome::Transplanted), None],
        }
    }

    #[test]
    fn classification_rules() {
        // Dense numeric: mean 3.2 observations per donor.
        let num = |t: f64, v: f64| (t, RawValue::Num(v));
        let cat = |t: f64, s: &str| (t, RawValue::Cat(s.to_string()));
        let mut records = Vec::new();
        for i in 0..10 {
            let mut series: Vec<(&str, Vec<TimePoint>)> = Vec::new();
            // dense: most donors have 3-4 points
            let dense: Vec<TimePoint> = (0..if i < 8 { 3 } else { 4 })
                .map(|j| num(j as f64, j as f64))
                .collect();
            series.push(("dense", dense));
            // posneg categorical, two points each
            series.push(("nitrite", vec![cat(0.0, "neg"), cat(5.0, "pos")]));
            // sparse numeric: half the donors have 2 points, half 1 -> mean 1.5 but
            // only 50% single-valued (not > 50%)
            let sparse: Vec<TimePoint> = if i % 2 == 0 {
                vec![num(0.0, 1.0)]
            } else {
                vec![num(0.0, 1.0), num(1.0, 2.0)]
            };
            series.push(("sparse", sparse));
            // 60% of donors with one value -> not a time series
            let single: Vec<TimePoint> = if i < 6 {
                vec![num(0.0, 1.0)]
            } else {
                vec![num(0.0, 1.0), num(1.0, 2.0)]
            };
            series.push(("mostly_single", single));
            records.push(record_with(&format!("d{i}"), &series));
        }
        let refs: Vec<&DonorRecord> = records.iter().collect();
        let kinds = classify_variables(&refs).unwrap();
        assert_eq!(kinds["dense"], TimeSeriesKind::Type3Dense);
        assert_eq!(kinds["nitrite"], TimeSeriesKind::Type1PosNeg);
        assert_eq!(kinds["sparse"], TimeSeriesKind::Type2Sparse);
        assert_eq!(kinds["mostly_single"], TimeSeriesKind::NotTimeSeries);
    }

    #[test]
    fn mixed_values_rejected() {
        let records = [record_with(
            "d0",
            &[(
                "bad",
                vec![
                    (0.0, RawValue::Num(1.0)),
                    (1.0, RawValue::Cat("neg".into())),
                ],
            )],
        )];
        let refs: Vec<&DonorRecord> = records.iter().collect();
        let err = classify_variables(&refs).unwrap_err();
        assert!(err.to_string().contains("bad"));
    }
}
