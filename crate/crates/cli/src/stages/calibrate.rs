//! Calibrate stage: Platt and isotonic maps fitted on the best run's
//! validation predictions, applied to its test predictions, with Brier
//! scores and reliability curves. The ensemble is excluded (its bases use
//! heterogeneous feature sets).

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use discardbench::calibration::{
    apply_isotonic, apply_platt, brier, fit_isotonic, fit_platt, reliability_curve, IsotonicMap,
    PlattParams,
};
use discardbench::matrix::write_csv_table;
use discardbench::models::ModelFamily;

use crate::config::PipelineConfig;

use super::{read_predictions, Paths, StageIo};

/// Best seed index per family by test normed MCC (ties: lowest seed).
pub fn best_seed_per_family(
    config: &PipelineConfig,
    paths: &Paths,
) -> Result<Vec<(ModelFamily, usize)>> {
    let (families, groups) = super::evaluate::metric_groups(config, paths, "normed_mcc")?;
    Ok(families
        .into_iter()
        .zip(groups)
        .map(|(family, values)| {
            let best = values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            (family, best)
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct CalibrationArtifact {
    family: String,
    best_seed_index: usize,
    platt: PlattParams,
    isotonic: IsotonicMap,
    brier_uncalibrated: f64,
    brier_platt: f64,
    brier_isotonic: f64,
}

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    anyhow::ensure!(
        paths.metrics_csv().exists(),
        "missing artifact {}: run evaluate first",
        paths.metrics_csv().display()
    );
    let best = best_seed_per_family(config, paths)?;
    let mut inputs = vec![paths.metrics_csv()];
    let mut outputs = Vec::new();
    let mut brier_rows: Vec<Vec<String>> = Vec::new();
    for (family, seed_index) in best {
        if family == ModelFamily::Ensemble {
            continue;
        }
        let val = read_predictions(&paths.predictions(family, seed_index, "val"))?;
        let test = read_predictions(&paths.predictions(family, seed_index, "test"))?;
        inputs.push(paths.predictions(family, seed_index, "val"));
        inputs.push(paths.predictions(family, seed_index, "test"));

        let platt = fit_platt(&val.raw_scores, &val.labels)
            .with_context(|| format!("fitting sigmoid calibration for {family}"))?;
        let isotonic = fit_isotonic(&val.raw_scores, &val.labels)?;
        let platt_probs = apply_platt(&platt, &test.raw_scores);
        let isotonic_probs = apply_isotonic(&isotonic, &test.raw_scores);

        let b_raw = brier(&test.probabilities, &test.labels)?;
        let b_platt = brier(&platt_probs, &test.labels)?;
        let b_iso = brier(&isotonic_probs, &test.labels)?;
        brier_rows.push(vec![
            family.code().to_string(),
            format!("{b_raw}"),
            format!("{b_platt}"),
            format!("{b_iso}"),
        ]);

        // Reliability curves for the three probability sources.
        let mut rows: Vec<Vec<String>> = Vec::new();
        for (method, probs) in [
            ("uncalibrated", &test.probabilities),
            ("platt", &platt_probs),
            ("isotonic", &isotonic_probs),
        ] {
            let curve = reliability_curve(probs, &test.labels, config.calibration_bins)?;
            for bin in &curve.bins {
                rows.push(vec![
                    method.to_string(),
                    bin.bin_index.to_string(),
                    format!("{}", bin.lo),
                    format!("{}", bin.hi),
                    format!("{}", bin.mean_predicted),
                    format!("{}", bin.fraction_positive),
                    bin.count.to_string(),
                ]);
            }
        }
        write_csv_table(
            &paths.reliability_csv(family),
            &[
                "method",
                "bin",
                "lo",
                "hi",
                "mean_predicted",
                "fraction_positive",
                "count",
            ],
            &rows,
        )?;
        outputs.push(paths.reliability_csv(family));

        let artifact = CalibrationArtifact {
            family: family.code().to_string(),
            best_seed_index: seed_index,
            platt,
            isotonic,
            brier_uncalibrated: b_raw,
            brier_platt: b_platt,
            brier_isotonic: b_iso,
        };
        std::fs::write(
            paths.calibration_json(family),
            serde_json::to_string_pretty(&artifact)?,
        )?;
        outputs.push(paths.calibration_json(family));
    }
    write_csv_table(
        &paths.brier_table(),
        &["model", "uncalibrated", "platt", "isotonic"],
        &brier_rows,
    )?;
    outputs.push(paths.brier_table());
    Ok((inputs, outputs))
}
