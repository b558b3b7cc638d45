//! Engineer stage: split the cohort, fit the feature schema on the train
//! pool, emit imputed matrices per split, and fit the scaler on the
//! training rows.

use anyhow::Result;

use discardbench::dataset::{split_cohort, StandardScaler};
use discardbench::features::FeatureSchema;
use discardbench::rng::derive_seed;

use crate::config::PipelineConfig;

use super::{load_cohort, Paths, StageIo, SALT_SPLIT_STAGE};

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    let cohort = load_cohort(paths)?;
    let split = split_cohort(
        &cohort,
        derive_seed(config.master_seed, SALT_SPLIT_STAGE, 0),
    )?;

    // Feature thresholds come from the full train pool; the validation
    // subset stays inside it for engineering purposes.
    let schema = FeatureSchema::fit(&cohort, &split.pool_ids(), config.engineering.clone())?;

    let (train, train_report) = schema.apply(&cohort, &split.train_ids)?;
    let (val, _) = schema.apply(&cohort, &split.val_ids)?;
    let (test, _) = schema.apply(&cohort, &split.test_ids)?;
    anyhow::ensure!(
        train.missing_count() == 0 && val.missing_count() == 0 && test.missing_count() == 0,
        "imputation left missing cells"
    );

    // Scaling parameters come exclusively from the training rows.
    let all_train_rows: Vec<usize> = (0..train.n_rows()).collect();
    let scaler = StandardScaler::fit(&train, &all_train_rows)?;

    split.write_json(&paths.split())?;
    schema.write_json(&paths.schema())?;
    scaler.write_json(&paths.scaler())?;
    train.write_csv(&paths.matrix("train"), Some(&paths.matrix_schema()))?;
    val.write_csv(&paths.matrix("val"), None)?;
    test.write_csv(&paths.matrix("test"), None)?;
    let report = serde_json::json!({
        "n_features": train.n_cols(),
        "dropped_columns": schema.dropped,
        "imputation_rounds": train_report.rounds_used,
        "imputation_converged": train_report.converged,
    });
    let report_path = paths.work.join("engineer_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;

    Ok((
        vec![paths.cohort.clone()],
        vec![
            paths.split(),
            paths.schema(),
            paths.scaler(),
            paths.matrix("train"),
            paths.matrix("val"),
            paths.matrix("test"),
            paths.matrix_schema(),
            report_path,
        ],
    ))
}
