//! Train stage: seeded retraining of every family on the 90/10
//! train/validation split, persisting models and val/test predictions.

use anyhow::{Context, Result};

use discardbench::eval::{seeded_retrain, RetrainData};
use discardbench::models::{fit_family_with, AnyModel, EnsembleModel, ModelFamily};

use crate::config::PipelineConfig;

use super::{
    load_scaled, load_selected, load_tuned, retrain_seeds, write_predictions, Paths, StageIo,
};

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    let (_, x_train, y_train) = load_scaled(paths, "train")?;
    let (_, x_val, y_val) = load_scaled(paths, "val")?;
    let (_, x_test, y_test) = load_scaled(paths, "test")?;
    let train_matrix = discardbench::matrix::FeatureMatrix::read_csv(&paths.matrix("train"))?;
    let val_ids = discardbench::matrix::FeatureMatrix::read_csv(&paths.matrix("val"))?.donor_ids;
    let test_ids = discardbench::matrix::FeatureMatrix::read_csv(&paths.matrix("test"))?.donor_ids;
    let _ = train_matrix;

    std::fs::create_dir_all(paths.models_dir())?;
    std::fs::create_dir_all(paths.predictions_dir())?;

    let options = config.training.fit_options();
    let seeds = retrain_seeds(config);
    let families = config.model_families();
    let run_ensemble = families.contains(&ModelFamily::Ensemble);

    let mut inputs = vec![
        paths.matrix("train"),
        paths.matrix("val"),
        paths.matrix("test"),
        paths.scaler(),
    ];
    let mut outputs = Vec::new();
    // Base-model fits per (family, seed index), kept for the ensemble.
    let mut fitted: std::collections::BTreeMap<(ModelFamily, usize), AnyModel> =
        std::collections::BTreeMap::new();

    for family in config.base_families() {
        let selected = load_selected(paths, family)?;
        let tuned = load_tuned(paths, family)?;
        inputs.push(paths.selected(family));
        inputs.push(paths.tuned(family));
        let xt = x_train.select_columns(&selected.indices);
        let xv = x_val.select_columns(&selected.indices);
        let xs = x_test.select_columns(&selected.indices);
        let data = RetrainData {
            x_train: &xt,
            y_train: &y_train,
            x_val: &xv,
            y_val: &y_val,
            x_test: &xs,
            y_test: &y_test,
        };
        let hp = tuned.hp.clone();
        let names = selected.names.clone();
        let opts = options.clone();
        let fit = move |d: &RetrainData<'_>, seed: u64| {
            fit_family_with(
                family,
                &hp,
                d.x_train,
                d.y_train,
                Some((d.x_val, d.y_val)),
                seed,
                &names,
                &opts,
            )
        };
        let runs = seeded_retrain(family, fit, &data, &seeds)
            .with_context(|| format!("retraining {family}"))?;
        for (i, run) in runs.iter().enumerate() {
            let model = run
                .model
                .as_ref()
                .with_context(|| format!("{family} seed {i} failed: {:?}", run.result.error))?;
            model.write_json(&paths.model(family, i))?;
            outputs.push(paths.model(family, i));
            let val_probs = model.predict_proba_batch(&xv);
            let val_raw = model.raw_score_batch(&xv);
            let test_probs = model.predict_proba_batch(&xs);
            let test_raw = model.raw_score_batch(&xs);
            write_predictions(
                &paths.predictions(family, i, "val"),
                &val_ids,
                &y_val,
                &val_raw,
                &val_probs,
            )?;
            write_predictions(
                &paths.predictions(family, i, "test"),
                &test_ids,
                &y_test,
                &test_raw,
                &test_probs,
            )?;
            outputs.push(paths.predictions(family, i, "val"));
            outputs.push(paths.predictions(family, i, "test"));
            if run_ensemble && family.ensemble_eligible() {
                fitted.insert((family, i), model.clone());
            }
        }
    }

    if run_ensemble {
        for i in 0..seeds.len() {
            let members = [
                ModelFamily::LogisticRegression,
                ModelFamily::RandomForest,
                ModelFamily::GradientBoosting,
                ModelFamily::Mlp,
            ]
            .iter()
            .map(|&family| {
                let selected = load_selected(paths, family)?;
                Ok(discardbench::models::ensemble::EnsembleMember {
                    model: fitted
                        .get(&(family, i))
                        .cloned()
                        .with_context(|| format!("missing {family} fit for seed {i}"))?,
                    feature_indices: selected.indices,
                })
            })
            .collect::<Result<Vec<_>>>()?;
            let ensemble = EnsembleModel::new(members)?;
            let model = AnyModel::Ensemble(ensemble);
            model.write_json(&paths.model(ModelFamily::Ensemble, i))?;
            let val_probs = model.predict_proba_batch(&x_val);
            let val_raw = model.raw_score_batch(&x_val);
            let test_probs = model.predict_proba_batch(&x_test);
            let test_raw = model.raw_score_batch(&x_test);
            write_predictions(
                &paths.predictions(ModelFamily::Ensemble, i, "val"),
                &val_ids,
                &y_val,
                &val_raw,
                &val_probs,
            )?;
            write_predictions(
                &paths.predictions(ModelFamily::Ensemble, i, "test"),
                &test_ids,
                &y_test,
                &test_raw,
                &test_probs,
            )?;
            outputs.push(paths.model(ModelFamily::Ensemble, i));
            outputs.push(paths.predictions(ModelFamily::Ensemble, i, "val"));
            outputs.push(paths.predictions(ModelFamily::Ensemble, i, "test"));
        }
    }
    Ok((inputs, outputs))
}
