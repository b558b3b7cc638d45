//! Explain stage: permutation Shapley attributions of each family's best
//! run on the test set, with train-background masking and global
//! mean-|phi| aggregation. The ensemble is excluded (feature attributions
//! across heterogeneous subsets are not comparable).

use anyhow::Result;

use discardbench::dataset::stratified_subsample;
use discardbench::explain::{aggregate_global, export_beeswarm, permutation_shap, Attribution};
use discardbench::matrix::write_csv_table;
use discardbench::models::{AnyModel, ModelFamily, ProbabilisticClassifier};
use discardbench::rng::derive_seed;

use crate::config::PipelineConfig;

use super::{load_scaled, load_selected, Paths, StageIo, SALT_SHAP_STAGE};

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    anyhow::ensure!(
        paths.metrics_csv().exists(),
        "missing artifact {}: run evaluate first",
        paths.metrics_csv().display()
    );
    let (_, x_train, y_train) = load_scaled(paths, "train")?;
    let (_, x_test, y_test) = load_scaled(paths, "test")?;
    let test_ids = discardbench::matrix::FeatureMatrix::read_csv(&paths.matrix("test"))?.donor_ids;
    let best = super::calibrate::best_seed_per_family(config, paths)?;

    let mut inputs = vec![
        paths.metrics_csv(),
        paths.matrix("train"),
        paths.matrix("test"),
    ];
    let mut outputs = Vec::new();
    let mut importance_rows: Vec<Vec<String>> = Vec::new();
    for (family, seed_index) in best {
        if family == ModelFamily::Ensemble {
            continue;
        }
        let selected = load_selected(paths, family)?;
        let model = AnyModel::read_json(&paths.model(family, seed_index))?;
        inputs.push(paths.model(family, seed_index));
        let sub_train = x_train.select_columns(&selected.indices);
        let sub_test = x_test.select_columns(&selected.indices);

        // Seeded stratified subsamples keep the stage tractable.
        let bg_rows = stratified_subsample(
            &y_train,
            config.shap.background_rows,
            derive_seed(config.master_seed, SALT_SHAP_STAGE, 1),
        );
        let background = sub_train.select_rows(&bg_rows);
        let explain_rows = stratified_subsample(
            &y_test,
            config.shap.explain_rows,
            derive_seed(config.master_seed, SALT_SHAP_STAGE, 2),
        );

        let predict = |row: &[f64]| model.predict_proba(row);
        let mut attributions: Vec<Attribution> = Vec::with_capacity(explain_rows.len());
        for (k, &row) in explain_rows.iter().enumerate() {
            attributions.push(permutation_shap(
                &predict,
                sub_test.row(row),
                &background,
                config.shap.n_permutations,
                derive_seed(config.master_seed, SALT_SHAP_STAGE, 100 + k as u64),
            )?);
        }

        // Per-sample beeswarm rows.
        let explained = sub_test.select_rows(&explain_rows);
        let rows = export_beeswarm(&attributions, &explained, &selected.names)?;
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    test_ids[explain_rows[r.sample_index]].clone(),
                    r.feature.clone(),
                    format!("{}", r.phi),
                    format!("{}", r.raw_value),
                ]
            })
            .collect();
        write_csv_table(
            &paths.shap_csv(family),
            &["donor_id", "feature", "phi", "raw_value"],
            &csv_rows,
        )?;
        outputs.push(paths.shap_csv(family));

        let global = aggregate_global(&attributions, &selected.names)?;
        for j in 0..global.feature_names.len() {
            importance_rows.push(vec![
                family.code().to_string(),
                global.feature_names[j].clone(),
                format!("{}", global.mean_abs[j]),
                format!("{}", global.std_abs[j]),
            ]);
        }
    }
    write_csv_table(
        &paths.shap_importance(),
        &["model", "feature", "mean_abs_phi", "std_abs_phi"],
        &importance_rows,
    )?;
    outputs.push(paths.shap_importance());
    Ok((inputs, outputs))
}
