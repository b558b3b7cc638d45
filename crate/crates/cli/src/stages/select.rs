//! Select stage: per-family evolutionary feature selection on the scaled
//! training matrix.

use anyhow::Result;

use discardbench::models::HyperParamSpace;
use discardbench::optim::{nsga2_feature_search, FamilySubsetObjective, Nsga2Config};
use discardbench::rng::derive_seed;

use crate::config::PipelineConfig;

use super::{load_scaled, Paths, SelectedFeatures, StageIo, SALT_SELECT_STAGE};

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    let (_, dense, labels) = load_scaled(paths, "train")?;
    let feature_names =
        discardbench::matrix::FeatureMatrix::read_csv(&paths.matrix("train"))?.feature_names;

    let mut outputs = Vec::new();
    for (fi, family) in config.base_families().into_iter().enumerate() {
        let objective = FamilySubsetObjective {
            lambda: config.budgets.lambda,
            inner_trials: config.budgets.inner_trials,
            folds: config.budgets.selection_folds,
            options: config.selection_training.fit_options(),
            ..FamilySubsetObjective::new(
                family,
                HyperParamSpace::for_family(family, config.space_profile),
                &dense,
                &labels,
            )
        };
        let outcome = nsga2_feature_search(
            &objective,
            &Nsga2Config {
                population: config.budgets.selection_population,
                budget: config.budgets.selection_trials,
                seed: derive_seed(config.master_seed, SALT_SELECT_STAGE, fi as u64),
                ..Nsga2Config::default()
            },
        )?;
        let indices: Vec<usize> = (0..outcome.best_genome.len())
            .filter(|&i| outcome.best_genome[i])
            .collect();
        let selected = SelectedFeatures {
            family: family.code().to_string(),
            genome: discardbench::optim::ledger::genome_to_string(&outcome.best_genome),
            names: indices.iter().map(|&i| feature_names[i].clone()).collect(),
            indices,
            loss: outcome.best_loss,
        };
        std::fs::write(
            paths.selected(family),
            serde_json::to_string_pretty(&selected)?,
        )?;
        outcome.ledger.write_jsonl(&paths.select_ledger(family))?;
        outputs.push(paths.selected(family));
        outputs.push(paths.select_ledger(family));
    }
    Ok((vec![paths.matrix("train"), paths.scaler()], outputs))
}
