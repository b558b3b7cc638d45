//! Tune stage: TPE hyperparameter optimization on each family's selected
//! feature subspace, scored by mean k-fold cross-validation normed MCC.

use anyhow::Result;

use discardbench::models::{fit_family_with, HyperParamSpace};
use discardbench::optim::{cross_validate, tpe_optimize, TpeConfig, TpeEval};
use discardbench::rng::derive_seed;

use crate::config::PipelineConfig;

use super::{load_scaled, load_selected, Paths, StageIo, TunedConfig, SALT_TUNE_STAGE};

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    let (_, dense, labels) = load_scaled(paths, "train")?;
    let options = config.training.fit_options();

    let mut outputs = Vec::new();
    let mut inputs = vec![paths.matrix("train"), paths.scaler()];
    for (fi, family) in config.base_families().into_iter().enumerate() {
        let selected = load_selected(paths, family)?;
        inputs.push(paths.selected(family));
        let sub = dense.select_columns(&selected.indices);
        let space = HyperParamSpace::for_family(family, config.space_profile);
        let folds = config.budgets.tuning_folds;
        let seed = derive_seed(config.master_seed, SALT_TUNE_STAGE, fi as u64);
        let outcome = tpe_optimize(
            &space,
            |hp, trial| {
                let opts = options.clone();
                let hp = hp.clone();
                let factory = move |tx: &discardbench::matrix::DenseMatrix,
                                    ty: &[u8],
                                    hx: &discardbench::matrix::DenseMatrix,
                                    hy: &[u8],
                                    fold_seed: u64| {
                    fit_family_with(family, &hp, tx, ty, Some((hx, hy)), fold_seed, &[], &opts)
                };
                let scores = cross_validate(
                    factory,
                    &sub,
                    &labels,
                    folds,
                    derive_seed(seed, 0xcf, trial as u64),
                )?;
                let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                Ok(TpeEval {
                    loss: 1.0 - mean,
                    fold_scores: scores,
                })
            },
            &TpeConfig {
                n_trials: config.budgets.tpe_trials,
                seed,
                ..TpeConfig::default()
            },
        )?;
        let tuned = TunedConfig {
            family: family.code().to_string(),
            hp: outcome.best_point.clone(),
            loss: outcome.best_loss,
        };
        std::fs::write(paths.tuned(family), serde_json::to_string_pretty(&tuned)?)?;
        outcome.ledger.write_jsonl(&paths.tune_ledger(family))?;
        outputs.push(paths.tuned(family));
        outputs.push(paths.tune_ledger(family));
    }
    Ok((inputs, outputs))
}
