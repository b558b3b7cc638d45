//! Stratified k-fold cross-validation scored by normed MCC.

use crate::error::{Error, Result};
use crate::eval::metrics::{confusion, normed_mcc};
use crate::matrix::DenseMatrix;
use crate::models::AnyModel;
use crate::rng;

const SALT_CV: u64 = 0xcf01d;

/// Deterministic stratified fold assignment: shuffle within each class,
/// deal round-robin. Every fold must contain both classes; one
/// re-stratification with a different stream is attempted before erroring.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Search("cross-validation needs k >= 2".into()));
    }
    if y.len() < 2 * k {
        return Err(Error::Search(format!(
            "{} samples are too few for {k}-fold cross-validation",
            y.len()
        )));
    }
    for attempt in 0..2u64 {
        let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
        let mut cursor = 0usize;
        for class in [0u8, 1] {
            let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
            let mut r = rng::stream(seed, SALT_CV, attempt);
            let order = rng::shuffled_indices(members.len(), &mut r);
            for &pos in &order {
                folds[cursor % k].push(members[pos]);
                cursor += 1;
            }
        }
        let ok = folds.iter().all(|f| {
            let pos = f.iter().filter(|&&i| y[i] != 0).count();
            pos > 0 && pos < f.len()
        });
        if ok {
            for f in folds.iter_mut() {
                f.sort_unstable();
            }
            return Ok(folds);
        }
    }
    Err(Error::Search(
        "a fold is missing a class even after re-stratification".into(),
    ))
}

/// Fits `factory(train_x, train_y, held_x, held_y, fold_seed)` per fold and
/// scores the held fold by normed MCC at threshold 0.5.
pub fn cross_validate<F>(
    factory: F,
    x: &DenseMatrix,
    y: &[u8],
    k: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&DenseMatrix, &[u8], &DenseMatrix, &[u8], u64) -> Result<AnyModel>,
{
    let folds = stratified_folds(y, k, seed)?;
    let mut scores = Vec::with_capacity(k);
    for (fi, fold) in folds.iter().enumerate() {
        let train_rows: Vec<usize> = (0..y.len()).filter(|i| !fold.contains(i)).collect();
        let x_train = x.select_rows(&train_rows);
        let y_train: Vec<u8> = train_rows.iter().map(|&i| y[i]).collect();
        let x_held = x.select_rows(fold);
        let y_held: Vec<u8> = fold.iter().map(|&i| y[i]).collect();
        let model = factory(
            &x_train,
            &y_train,
            &x_held,
            &y_held,
            rng::derive_seed(seed, SALT_CV ^ 0xf17, fi as u64),
        )?;
        let probs = model.predict_proba_batch(&x_held);
        let c = confusion(&y_held, &probs, 0.5)?;
        scores.push(normed_mcc(&c));
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::linear::LogRegModel;
    use crate::models::LogRegParams;

    fn constant_model(p: f64) -> AnyModel {
        AnyModel::LogisticRegression(LogRegModel {
            weights: vec![0.0],
            intercept: (p / (1.0 - p)).ln(),
            params: LogRegParams::new(1.0, 0.0),
            seed: 0,
            feature_names: vec![],
            epochs_run: 0,
        })
    }

    #[test]
    fn fold_sizes_balanced() {
        let y: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let folds = stratified_folds(&y, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 20);
        }
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let y: Vec<u8> = (0..60).map(|i| (i % 4 == 0) as u8).collect(); // 25% positive
        let a = stratified_folds(&y, 3, 9).unwrap();
        let b = stratified_folds(&y, 3, 9).unwrap();
        assert_eq!(a, b);
        for f in &a {
            let pos = f.iter().filter(|&&i| y[i] != 0).count();
            assert_eq!(pos, 5, "each fold carries its share of positives");
        }
    }

    #[test]
    fn class_starved_folds_error() {
        // Only one positive sample: with k = 3 some fold lacks it.
        let mut y = vec![0u8; 12];
        y[0] = 1;
        assert!(stratified_folds(&y, 3, 0).is_err());
    }

    #[test]
    fn oracle_model_scores_one() {
        // The feature equals the label, so every fold's tree is perfect.
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 2) as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let x = DenseMatrix::from_rows(&rows);
        let factory = |tx: &DenseMatrix, ty: &[u8], _hx: &DenseMatrix, _hy: &[u8], s: u64| {
            crate::models::tree::fit_decision_tree(
                tx,
                ty,
                &crate::models::DecisionTreeParams {
                    max_depth: 2,
                    min_samples_leaf: 1,
                    min_samples_split: 2,
                    max_features: crate::models::MaxFeatures::All,
                },
                s,
                vec![],
            )
            .map(AnyModel::DecisionTree)
        };
        let scores = cross_validate(factory, &x, &y, 4, 5).unwrap();
        assert!(
            scores.iter().all(|&s| (s - 1.0).abs() < 1e-12),
            "{scores:?}"
        );
    }

    #[test]
    fn constant_classifier_scores_half() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..30).map(|i| (i % 3 == 0) as u8).collect();
        let x = DenseMatrix::from_rows(&rows);
        let factory =
            |_: &DenseMatrix, _: &[u8], _: &DenseMatrix, _: &[u8], _: u64| Ok(constant_model(0.9));
        let scores = cross_validate(factory, &x, &y, 3, 1).unwrap();
        // All predicted positive: zero marginals, normed MCC convention 0.5.
        assert!(scores.iter().all(|&s| s == 0.5), "{scores:?}");
    }
}
