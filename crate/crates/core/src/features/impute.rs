//! The multi-strategy imputation plan.
//!
//! Strategies follow the cohort's documented handling: logical defaults,
//! declarative config rules backed by auxiliary donor fields, normal-sample
//! draws restricted to the central 95% range (distribution fitted per
//! split), dichotomization of features with more than 70% training
//! missingness, round-robin iterative ridge regression for the rest, and a
//! train-mean fallback for features that are only missing outside the
//! training set.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng;
use crate::rng::fnv1a;

/// One declarative backfill rule: when the donor's auxiliary variable
/// matches the pattern, fill with the given value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueRule {
    pub pattern: String,
    pub value: f64,
}

/// Strategy classes assignable in the configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategySpec {
    /// Missing means "not present": fill a fixed value.
    LogicalDefault { value: f64 },
    /// Backfill from an auxiliary donor field via pattern rules.
    ConfigRule {
        source_var: String,
        rules: Vec<ValueRule>,
        fallback: Option<f64>,
    },
    /// Draw from a per-split normal distribution, central 95% only.
    NormalSample95,
    /// Drop the values, emit a missing/not-missing indicator.
    DichotomizeMissing,
    /// Round-robin iterative ridge regression.
    IterativeRegression,
    /// High-missingness features dichotomize, the rest go to the
    /// iterative imputer.
    Auto,
}

/// Pattern-to-strategy assignment; first matching pattern wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyAssignment {
    /// Regular expression matched against the full feature name.
    pub pattern: String,
    pub strategy: StrategySpec,
}

/// Imputation section of the engineering configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub assignments: Vec<StrategyAssignment>,
    /// Strategy for incomplete features no pattern matches; `None` makes an
    /// unmatched incomplete feature a planning error.
    pub default_strategy: Option<StrategySpec>,
    pub high_missing_threshold: f64,
    pub central_range_z: f64,
    pub max_rounds: usize,
    pub rel_tol: f64,
    pub ridge_penalty: f64,
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            assignments: Vec::new(),
            default_strategy: Some(StrategySpec::Auto),
            high_missing_threshold: 0.70,
            central_range_z: 1.96,
            max_rounds: 10,
            rel_tol: 1e-3,
            ridge_penalty: 1.0,
            seed: 0,
        }
    }
}

/// Fitted per-feature strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FittedStrategy {
    LogicalDefault {
        value: f64,
    },
    ConfigRule {
        source_var: String,
        rules: Vec<ValueRule>,
        fallback: Option<f64>,
    },
    NormalSample {
        train_mean: f64,
        train_std: f64,
    },
    /// Feature column replaced by a missingness indicator.
    MissingnessIndicator,
    /// Filled by the round-robin ridge imputer.
    Iterative,
}

/// Ridge model predicting one feature from all others.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeModel {
    pub target: String,
    /// Weights aligned with `predictors`; intercept last.
    pub predictors: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Train-fitted imputation plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputationPlan {
    pub strategies: BTreeMap<String, FittedStrategy>,
    /// Train means of every feature (observed cells), for initial fills and
    /// the mean fallback on features complete in training.
    pub train_means: BTreeMap<String, f64>,
    /// Iterative visit order: ascending train missingness.
    pub iterative_order: Vec<String>,
    pub iterative_models: Vec<RidgeModel>,
    pub central_range_z: f64,
    pub max_rounds: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Whether the training fit reached the relative-change tolerance.
    pub converged: bool,
    pub rounds_used: usize,
}

/// Outcome report of one imputation application.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputeReport {
    pub rounds_used: usize,
    pub converged: bool,
    pub cells_filled: usize,
}

/// Auxiliary donor-field lookup used by config rules.
pub trait AuxLookup {
    fn value(&self, donor_id: &str, var: &str) -> Option<String>;
}

/// Lookup with no auxiliary data.
pub struct NoAux;

impl AuxLookup for NoAux {
    fn value(&self, _donor_id: &str, _var: &str) -> Option<String> {
        None
    }
}

impl AuxLookup for BTreeMap<(String, String), String> {
    fn value(&self, donor_id: &str, var: &str) -> Option<String> {
        self.get(&(donor_id.to_string(), var.to_string())).cloned()
    }
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_of(values: &[f64], mean: f64) -> f64 {
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Cholesky solve of the SPD system `a x = b`; `a` is row-major n x n.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

/// Fits ridge regression of `y` on `x` rows (intercept unpenalized).
fn fit_ridge(rows: &[Vec<f64>], y: &[f64], penalty: f64) -> (Vec<f64>, f64) {
    let d = rows.first().map_or(0, |r| r.len());
    let n = d + 1; // +intercept
    let mut g = vec![0.0f64; n * n];
    let mut b = vec![0.0f64; n];
    for (row, &target) in rows.iter().zip(y) {
        for i in 0..d {
            for j in 0..=i {
                g[i * n + j] += row[i] * row[j];
            }
            g[d * n + i] += row[i];
            b[i] += row[i] * target;
        }
        g[d * n + d] += 1.0;
        b[d] += target;
    }
    // Mirror the lower triangle.
    for i in 0..n {
        for j in (i + 1)..n {
            g[i * n + j] = g[j * n + i];
        }
    }
    for i in 0..d {
        g[i * n + i] += penalty;
    }
    // Jittered retries for near-singular systems.
    let trace: f64 = (0..n).map(|i| g[i * n + i]).sum();
    let mut jitter = 0.0;
    for _ in 0..6 {
        let mut ga = g.clone();
        if jitter > 0.0 {
            for i in 0..n {
                ga[i * n + i] += jitter;
            }
        }
        if let Some(sol) = cholesky_solve(&ga, &b, n) {
            let intercept = sol[d];
            return (sol[..d].to_vec(), intercept);
        }
        jitter = if jitter == 0.0 {
            trace.max(1.0) * 1e-10
        } else {
            jitter * 100.0
        };
    }
    // Degenerate design: fall back to the plain mean.
    (vec![0.0; d], mean_of(y))
}

fn resolve_strategy(
    name: &str,
    miss_frac: f64,
    compiled: &[(Regex, StrategySpec)],
    config: &StrategyConfig,
) -> Result<StrategySpec> {
    let spec = compiled
        .iter()
        .find(|(re, _)| re.is_match(name))
        .map(|(_, s)| s.clone())
        .or_else(|| config.default_strategy.clone())
        .ok_or_else(|| {
            Error::ImputePlan(format!(
                "feature '{name}' has no assigned imputation strategy"
            ))
        })?;
    Ok(match spec {
        StrategySpec::Auto => {
            if miss_frac > config.high_missing_threshold {
                StrategySpec::DichotomizeMissing
            } else {
                StrategySpec::IterativeRegression
            }
        }
        other => other,
    })
}

/// Fits the imputation plan on the training matrix. `aux` backs any
/// config-rule strategies during the training-side fit.
pub fn fit_imputation_plan_with_aux(
    train: &FeatureMatrix,
    config: &StrategyConfig,
    aux: &dyn AuxLookup,
) -> Result<ImputationPlan> {
    let compiled: Vec<(Regex, StrategySpec)> = config
        .assignments
        .iter()
        .map(|a| {
            Regex::new(&a.pattern)
                .map(|re| (re, a.strategy.clone()))
                .map_err(|e| Error::ImputePlan(format!("bad pattern '{}': {e}", a.pattern)))
        })
        .collect::<Result<_>>()?;

    let mut strategies: BTreeMap<String, FittedStrategy> = BTreeMap::new();
    let mut train_means: BTreeMap<String, f64> = BTreeMap::new();
    let mut iterative: Vec<(String, f64)> = Vec::new();

    for (c, name) in train.feature_names.iter().enumerate() {
        let observed = train.observed_column(c);
        let miss_frac = train.missing_fraction(c);
        if !observed.is_empty() {
            train_means.insert(name.clone(), mean_of(&observed));
        }
        if miss_frac == 0.0 {
            continue;
        }
        let spec = resolve_strategy(name, miss_frac, &compiled, config)?;
        let fitted = match spec {
            StrategySpec::LogicalDefault { value } => FittedStrategy::LogicalDefault { value },
            StrategySpec::ConfigRule {
                source_var,
                rules,
                fallback,
            } => {
                for r in &rules {
                    Regex::new(&r.pattern).map_err(|e| {
                        Error::ImputePlan(format!("bad rule pattern '{}': {e}", r.pattern))
                    })?;
                }
                FittedStrategy::ConfigRule {
                    source_var,
                    rules,
                    fallback,
                }
            }
            StrategySpec::NormalSample95 => {
                if observed.len() < 2 {
                    return Err(Error::ImputePlan(format!(
                        "feature '{name}': normal-sample strategy needs at least 2 observed training values"
                    )));
                }
                let m = mean_of(&observed);
                FittedStrategy::NormalSample {
                    train_mean: m,
                    train_std: std_of(&observed, m),
                }
            }
            StrategySpec::DichotomizeMissing => FittedStrategy::MissingnessIndicator,
            StrategySpec::IterativeRegression => {
                if observed.is_empty() {
                    return Err(Error::ImputePlan(format!(
                        "feature '{name}': iterative strategy needs observed training values"
                    )));
                }
                iterative.push((name.clone(), miss_frac));
                FittedStrategy::Iterative
            }
            StrategySpec::Auto => unreachable!("resolved above"),
        };
        strategies.insert(name.clone(), fitted);
    }

    // Visit order: ascending missingness, name as tiebreak.
    iterative.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let iterative_order: Vec<String> = iterative.into_iter().map(|(n, _)| n).collect();

    let mut plan = ImputationPlan {
        strategies,
        train_means,
        iterative_order,
        iterative_models: Vec::new(),
        central_range_z: config.central_range_z,
        max_rounds: config.max_rounds,
        rel_tol: config.rel_tol,
        seed: config.seed,
        converged: true,
        rounds_used: 0,
    };

    // Fit the iterative models by running the round-robin on training data.
    if !plan.iterative_order.is_empty() {
        let mut work = train.clone();
        apply_simple_strategies(&plan, &mut work, aux)?;
        fill_non_iterative_with_means(&plan, &mut work)?;
        let (models, rounds, converged) =
            fit_iterative(&plan, &mut work, train, config.ridge_penalty)?;
        plan.iterative_models = models;
        plan.rounds_used = rounds;
        plan.converged = converged;
    }
    Ok(plan)
}

/// Fits the imputation plan with no auxiliary donor fields.
pub fn fit_imputation_plan(
    train: &FeatureMatrix,
    config: &StrategyConfig,
) -> Result<ImputationPlan> {
    fit_imputation_plan_with_aux(train, config, &NoAux)
}

/// Mean-fills every still-missing cell outside the iterative targets, so
/// iterative rounds never read an incomplete predictor.
fn fill_non_iterative_with_means(plan: &ImputationPlan, work: &mut FeatureMatrix) -> Result<()> {
    for c in 0..work.n_cols() {
        let name = work.feature_names[c].clone();
        if plan.iterative_order.contains(&name) {
            continue;
        }
        for r in 0..work.n_rows() {
            if work.is_missing(r, c) {
                let mean = plan.train_means.get(&name).copied().ok_or_else(|| {
                    Error::ImputePlan(format!(
                        "feature '{name}' has missing cells but no training mean"
                    ))
                })?;
                work.set(r, c, mean);
            }
        }
    }
    Ok(())
}

/// Applies every non-iterative strategy in place (leaves iterative cells
/// missing). The dichotomize transform renames columns, so later steps key
/// on the updated names.
fn apply_simple_strategies(
    plan: &ImputationPlan,
    m: &mut FeatureMatrix,
    aux: &dyn AuxLookup,
) -> Result<()> {
    for (name, strat) in &plan.strategies {
        let Some(col) = m.col_index(name) else {
            // Already transformed (e.g. re-imputing an imputed matrix).
            continue;
        };
        match strat {
            FittedStrategy::LogicalDefault { value } => {
                for r in 0..m.n_rows() {
                    if m.is_missing(r, col) {
                        m.set(r, col, *value);
                    }
                }
            }
            FittedStrategy::ConfigRule {
                source_var,
                rules,
                fallback,
            } => {
                let compiled: Vec<(Regex, f64)> = rules
                    .iter()
                    .map(|r| (Regex::new(&r.pattern).expect("validated at fit"), r.value))
                    .collect();
                for r in 0..m.n_rows() {
                    if !m.is_missing(r, col) {
                        continue;
                    }
                    let donor = m.donor_ids[r].clone();
                    let source = aux.value(&donor, source_var);
                    let mut filled = false;
                    if let Some(text) = source {
                        for (re, value) in &compiled {
                            if re.is_match(&text) {
                                m.set(r, col, *value);
                                filled = true;
                                break;
                            }
                        }
                    }
                    if !filled {
                        if let Some(v) = fallback {
                            m.set(r, col, *v);
                        }
                    }
                }
            }
            FittedStrategy::NormalSample {
                train_mean,
                train_std,
            } => {
                // Distribution fitted on the split being imputed; train
                // statistics back up degenerate columns.
                let obs = m.observed_column(col);
                let (mu, sigma) = if obs.len() >= 2 {
                    let mu = mean_of(&obs);
                    let s = std_of(&obs, mu);
                    if s > 0.0 {
                        (mu, s)
                    } else {
                        (*train_mean, *train_std)
                    }
                } else {
                    (*train_mean, *train_std)
                };
                let z = plan.central_range_z;
                for r in 0..m.n_rows() {
                    if !m.is_missing(r, col) {
                        continue;
                    }
                    if sigma == 0.0 {
                        m.set(r, col, mu);
                        continue;
                    }
                    let mut cell_rng = rng::stream(
                        plan.seed,
                        fnv1a(name.as_bytes()),
                        fnv1a(m.donor_ids[r].as_bytes()),
                    );
                    let mut value = None;
                    for _ in 0..1000 {
                        let draw = mu + sigma * rng::standard_normal(&mut cell_rng);
                        if (draw - mu).abs() <= z * sigma {
                            value = Some(draw);
                            break;
                        }
                    }
                    let v = value.unwrap_or_else(|| {
                        // Cap reached: clamp the final draw into range.
                        let draw = mu + sigma * rng::standard_normal(&mut cell_rng);
                        draw.clamp(mu - z * sigma, mu + z * sigma)
                    });
                    m.set(r, col, v);
                }
            }
            FittedStrategy::MissingnessIndicator => {
                let new_name = format!("{name} missingness");
                for r in 0..m.n_rows() {
                    let v = if m.is_missing(r, col) { 1.0 } else { 0.0 };
                    m.set(r, col, v);
                }
                m.feature_names[col] = new_name;
            }
            FittedStrategy::Iterative => {}
        }
    }
    Ok(())
}

/// Runs the round-robin ridge fit on the training matrix, returning the
/// per-feature models from the final round.
fn fit_iterative(
    plan: &ImputationPlan,
    work: &mut FeatureMatrix,
    original: &FeatureMatrix,
    penalty: f64,
) -> Result<(Vec<RidgeModel>, usize, bool)> {
    let order: Vec<usize> = plan
        .iterative_order
        .iter()
        .map(|n| {
            work.col_index(n)
                .ok_or_else(|| Error::ImputePlan(format!("iterative feature '{n}' not in matrix")))
        })
        .collect::<Result<_>>()?;

    // Initial fill: train column means.
    for &col in &order {
        let mean = plan.train_means[&work.feature_names[col]];
        for r in 0..work.n_rows() {
            if work.is_missing(r, col) {
                work.set(r, col, mean);
            }
        }
    }

    let n_cols = work.n_cols();
    let mut models: Vec<RidgeModel> = Vec::new();
    let mut rounds = 0;
    let mut converged = false;
    for round in 0..plan.max_rounds {
        rounds = round + 1;
        models.clear();
        let mut max_rel_change: f64 = 0.0;
        for &col in &order {
            let target_name = work.feature_names[col].clone();
            let predictors: Vec<usize> = (0..n_cols).filter(|&c| c != col).collect();
            // Fit on rows where the target was actually observed.
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut ys: Vec<f64> = Vec::new();
            for r in 0..work.n_rows() {
                if original.is_missing(r, col) {
                    continue;
                }
                rows.push(
                    predictors
                        .iter()
                        .map(|&c| work.get(r, c).unwrap())
                        .collect(),
                );
                ys.push(work.get(r, col).unwrap());
            }
            let (weights, intercept) = fit_ridge(&rows, &ys, penalty);
            // Refresh the originally-missing cells.
            let scale = std_of(&ys, mean_of(&ys)).max(1e-12);
            for r in 0..work.n_rows() {
                if !original.is_missing(r, col) {
                    continue;
                }
                let x: Vec<f64> = predictors
                    .iter()
                    .map(|&c| work.get(r, c).unwrap())
                    .collect();
                let pred: f64 = x.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() + intercept;
                let old = work.get(r, col).unwrap();
                max_rel_change = max_rel_change.max((pred - old).abs() / scale);
                work.set(r, col, pred);
            }
            models.push(RidgeModel {
                target: target_name,
                predictors: predictors
                    .iter()
                    .map(|&c| work.feature_names[c].clone())
                    .collect(),
                weights,
                intercept,
            });
        }
        if max_rel_change < plan.rel_tol {
            converged = true;
            break;
        }
    }
    Ok((models, rounds, converged))
}

/// Applies a fitted plan to a matrix. Only originally-missing cells change;
/// the output contains no missing values.
pub fn impute(
    plan: &ImputationPlan,
    matrix: &FeatureMatrix,
    aux: &dyn AuxLookup,
) -> Result<(FeatureMatrix, ImputeReport)> {
    let mut work = matrix.clone();
    let missing_before = work.missing_count();
    apply_simple_strategies(plan, &mut work, aux)?;
    // Features complete in training but missing here get the train mean
    // before any iterative round reads them as predictors.
    fill_non_iterative_with_means(plan, &mut work)?;

    // Iterative features: initial fill with train means, then rounds with
    // the stored ridge models.
    let original = matrix;
    let mut rounds_used = 0;
    let mut converged = true;
    if !plan.iterative_models.is_empty() {
        let mut targets: Vec<(usize, &RidgeModel)> = Vec::new();
        for model in &plan.iterative_models {
            if let Some(col) = work.col_index(&model.target) {
                targets.push((col, model));
            }
        }
        for (col, model) in &targets {
            let mean = plan.train_means[&model.target];
            for r in 0..work.n_rows() {
                if work.is_missing(r, *col) {
                    work.set(r, *col, mean);
                }
            }
        }
        let any_missing = targets
            .iter()
            .any(|(col, _)| (0..original.n_rows()).any(|r| original.is_missing(r, *col)));
        if any_missing {
            converged = false;
            for round in 0..plan.max_rounds {
                rounds_used = round + 1;
                let mut max_rel_change: f64 = 0.0;
                for (col, model) in &targets {
                    let pred_cols: Vec<usize> = model
                        .predictors
                        .iter()
                        .map(|n| {
                            work.col_index(n).ok_or_else(|| {
                                Error::ImputePlan(format!("predictor '{n}' missing from matrix"))
                            })
                        })
                        .collect::<Result<_>>()?;
                    let obs = work.observed_column(*col);
                    let scale = std_of(&obs, mean_of(&obs)).max(1e-12);
                    for r in 0..work.n_rows() {
                        if !original.is_missing(r, *col) {
                            continue;
                        }
                        let pred: f64 = pred_cols
                            .iter()
                            .zip(&model.weights)
                            .map(|(&c, w)| work.get(r, c).unwrap() * w)
                            .sum::<f64>()
                            + model.intercept;
                        let old = work.get(r, *col).unwrap();
                        max_rel_change = max_rel_change.max((pred - old).abs() / scale);
                        work.set(r, *col, pred);
                    }
                }
                if max_rel_change < plan.rel_tol {
                    converged = true;
                    break;
                }
            }
        }
    }

    // Mean fallback for features that were complete in training.
    for c in 0..work.n_cols() {
        let name = work.feature_names[c].clone();
        for r in 0..work.n_rows() {
            if work.is_missing(r, c) {
                let mean = plan.train_means.get(&name).copied().ok_or_else(|| {
                    Error::ImputePlan(format!(
                        "feature '{name}' has missing cells but no training mean"
                    ))
                })?;
                work.set(r, c, mean);
            }
        }
    }

    debug_assert_eq!(work.missing_count(), 0);
    Ok((
        work,
        ImputeReport {
            rounds_used,
            converged,
            cells_filled: missing_before,
        },
    ))
}
