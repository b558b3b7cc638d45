//! Loss of a candidate feature subset: a nested randomized hyperparameter
//! search with k-fold cross-validation plus a feature-count penalty.

use crate::matrix::DenseMatrix;
use crate::models::{fit_family_with, FitOptions, HyperParamSpace, ModelFamily};
use crate::optim::cv::cross_validate;
use crate::rng;

/// Feature-count penalty coefficient.
pub const DEFAULT_LAMBDA: f64 = 0.0005;

const SALT_SUBSET: u64 = 0x5eb5;

/// Evaluated loss of one genome.
#[derive(Debug, Clone)]
pub struct SubsetLoss {
    /// Normed MCC per (inner trial, fold), flattened.
    pub fold_scores: Vec<f64>,
    pub penalty: f64,
    /// mean(1 - normed MCC) + penalty.
    pub total: f64,
}

/// Objective evaluated by the genetic feature search.
pub trait SubsetObjective: Sync {
    fn genome_length(&self) -> usize;

    /// Evaluates one genome; never fails — an empty genome is assigned the
    /// worst loss of 1 (plus zero penalty).
    fn evaluate(&self, genome: &[bool], trial_seed: u64) -> SubsetLoss;
}

/// Worst-case loss assigned to empty genomes.
pub fn empty_genome_loss() -> SubsetLoss {
    SubsetLoss {
        fold_scores: Vec::new(),
        penalty: 0.0,
        total: 1.0,
    }
}

/// The standard objective: `inner_trials` random hyperparameter points,
/// each scored by `folds`-fold cross-validation on the selected columns.
pub struct FamilySubsetObjective<'a> {
    pub family: ModelFamily,
    pub space: HyperParamSpace,
    pub x: &'a DenseMatrix,
    pub y: &'a [u8],
    pub lambda: f64,
    pub inner_trials: usize,
    pub folds: usize,
    pub options: FitOptions,
}

impl<'a> FamilySubsetObjective<'a> {
    pub fn new(
        family: ModelFamily,
        space: HyperParamSpace,
        x: &'a DenseMatrix,
        y: &'a [u8],
    ) -> Self {
        FamilySubsetObjective {
            family,
            space,
            x,
            y,
            lambda: DEFAULT_LAMBDA,
            inner_trials: 10,
            folds: 3,
            options: FitOptions::default(),
        }
    }
}

impl SubsetObjective for FamilySubsetObjective<'_> {
    fn genome_length(&self) -> usize {
        self.x.n_cols
    }

    fn evaluate(&self, genome: &[bool], trial_seed: u64) -> SubsetLoss {
        let selected: Vec<usize> = (0..genome.len()).filter(|&i| genome[i]).collect();
        if selected.is_empty() {
            return empty_genome_loss();
        }
        let sub_x = self.x.select_columns(&selected);
        let mut fold_scores = Vec::with_capacity(self.inner_trials * self.folds);
        for t in 0..self.inner_trials {
            let mut hp_rng = rng::stream(trial_seed, SALT_SUBSET, t as u64);
            let hp = self.space.sample(&mut hp_rng);
            let family = self.family;
            let options = self.options.clone();
            let factory =
                move |tx: &DenseMatrix, ty: &[u8], hx: &DenseMatrix, hy: &[u8], fold_seed: u64| {
                    fit_family_with(
                        family,
                        &hp,
                        tx,
                        ty,
                        Some((hx, hy)),
                        fold_seed,
                        &[],
                        &options,
                    )
                };
            match cross_validate(
                factory,
                &sub_x,
                self.y,
                self.folds,
                rng::derive_seed(trial_seed, SALT_SUBSET ^ 0xcd, t as u64),
            ) {
                Ok(scores) => fold_scores.extend(scores),
                // A failed inner trial contributes worst-case fold scores.
                Err(_) => fold_scores.extend(std::iter::repeat_n(0.0, self.folds)),
            }
        }
        let penalty = self.lambda * selected.len() as f64;
        let mean_loss = fold_scores.iter().map(|s| 1.0 - s).sum::<f64>() / fold_scores.len() as f64;
        SubsetLoss {
            fold_scores,
            penalty,
            total: mean_loss + penalty,
        }
    }
}

/// A cheap evaluator for recovery tests and desk-scale smoke runs: one
/// fixed ridge-logistic configuration scored by k-fold CV. Folds derive
/// from the per-genome trial seed mixed with `fold_seed`, so no genome can
/// co-adapt to one frozen split.
pub struct FastLinearObjective<'a> {
    pub x: &'a DenseMatrix,
    pub y: &'a [u8],
    pub lambda: f64,
    pub folds: usize,
    pub fold_seed: u64,
    pub c: f64,
    pub max_epochs: usize,
}

impl<'a> FastLinearObjective<'a> {
    pub fn new(x: &'a DenseMatrix, y: &'a [u8]) -> Self {
        FastLinearObjective {
            x,
            y,
            lambda: DEFAULT_LAMBDA,
            folds: 3,
            fold_seed: 1,
            c: 1.0,
            max_epochs: 40,
        }
    }
}

impl SubsetObjective for FastLinearObjective<'_> {
    fn genome_length(&self) -> usize {
        self.x.n_cols
    }

    fn evaluate(&self, genome: &[bool], _trial_seed: u64) -> SubsetLoss {
        let selected: Vec<usize> = (0..genome.len()).filter(|&i| genome[i]).collect();
        if selected.is_empty() {
            return empty_genome_loss();
        }
        let sub_x = self.x.select_columns(&selected);
        let params = crate::models::LogRegParams {
            c: self.c,
            l1_ratio: 0.0,
            tol: 1e-5,
            max_epochs: self.max_epochs,
        };
        let factory = |tx: &DenseMatrix, ty: &[u8], _hx: &DenseMatrix, _hy: &[u8], _s: u64| {
            crate::models::linear::fit_logreg_elasticnet(tx, ty, &params, 0, vec![])
                .map(crate::models::AnyModel::LogisticRegression)
        };
        let fold_scores = match cross_validate(
            factory,
            &sub_x,
            self.y,
            self.folds,
            rng::derive_seed(self.fold_seed, 0xfa57, _trial_seed),
        ) {
            Ok(scores) => scores,
            Err(_) => vec![0.0; self.folds],
        };
        let penalty = self.lambda * selected.len() as f64;
        let mean_loss = fold_scores.iter().map(|s| 1.0 - s).sum::<f64>() / fold_scores.len() as f64;
        SubsetLoss {
            fold_scores,
            penalty,
            total: mean_loss + penalty,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle objective mimicking a perfect model: normed MCC 1 on every
    /// fold, so only the penalty remains.
    struct OracleObjective {
        len: usize,
        lambda: f64,
    }

    impl SubsetObjective for OracleObjective {
        fn genome_length(&self) -> usize {
            self.len
        }

        fn evaluate(&self, genome: &[bool], _seed: u64) -> SubsetLoss {
            let n = genome.iter().filter(|&&b| b).count();
            if n == 0 {
                return empty_genome_loss();
            }
            let fold_scores = vec![1.0; 30];
            SubsetLoss {
                fold_scores,
                penalty: self.lambda * n as f64,
                total: 0.0 + self.lambda * n as f64,
            }
        }
    }

    #[test]
    fn perfect_oracle_loss_is_pure_penalty() {
        let obj = OracleObjective {
            len: 20,
            lambda: DEFAULT_LAMBDA,
        };
        let mut genome = vec![false; 20];
        for bit in genome.iter_mut().take(10) {
            *bit = true;
        }
        let loss = obj.evaluate(&genome, 0);
        assert!((loss.total - 0.005).abs() < 1e-15);
    }

    #[test]
    fn penalty_arithmetic() {
        assert!((DEFAULT_LAMBDA * 200.0 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn empty_genome_gets_worst_loss() {
        let obj = OracleObjective {
            len: 5,
            lambda: DEFAULT_LAMBDA,
        };
        let loss = obj.evaluate(&[false; 5], 3);
        assert_eq!(loss.total, 1.0);
        assert_eq!(loss.penalty, 0.0);
    }

    #[test]
    fn fewer_features_win_at_equal_performance() {
        let obj = OracleObjective {
            len: 30,
            lambda: DEFAULT_LAMBDA,
        };
        let mut small = vec![false; 30];
        let mut large = vec![false; 30];
        for bit in small.iter_mut().take(5) {
            *bit = true;
        }
        for bit in large.iter_mut().take(25) {
            *bit = true;
        }
        assert!(obj.evaluate(&small, 0).total < obj.evaluate(&large, 0).total);
    }

    #[test]
    fn family_objective_runs_end_to_end() {
        // Tiny smoke test with the real DT evaluator.
        let mut rng = crate::rng::from_seed(4);
        use rand::Rng;
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..6).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| (r[0] > 0.5) as u8).collect();
        let x = DenseMatrix::from_rows(&rows);
        let obj = FamilySubsetObjective {
            inner_trials: 2,
            folds: 3,
            ..FamilySubsetObjective::new(
                ModelFamily::DecisionTree,
                HyperParamSpace::for_family(
                    ModelFamily::DecisionTree,
                    crate::models::SpaceProfile::Desk,
                ),
                &x,
                &y,
            )
        };
        let genome = vec![true, true, false, false, true, false];
        let a = obj.evaluate(&genome, 7);
        let b = obj.evaluate(&genome, 7);
        assert_eq!(a.fold_scores, b.fold_scores);
        assert_eq!(a.total, b.total);
        assert_eq!(a.fold_scores.len(), 6);
        assert!((a.penalty - 3.0 * DEFAULT_LAMBDA).abs() < 1e-15);
        assert!(a.total.is_finite());
    }
}
