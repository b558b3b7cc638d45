//! Evaluate stage: per-seed metrics from the stored test predictions, plus
//! the ANOVA and Tukey HSD comparison across families.

use anyhow::Result;
use serde::Serialize;

use discardbench::eval::{anova_oneway, auc, confusion, f1, normed_mcc, tukey_hsd};
use discardbench::matrix::write_csv_table;
use discardbench::models::ModelFamily;

use crate::config::PipelineConfig;

use super::{read_predictions, retrain_seeds, Paths, StageIo};

pub const METRICS: [&str; 3] = ["f1", "auc", "normed_mcc"];

/// Per-family metric samples across seeds (configuration order).
pub fn metric_groups(
    config: &PipelineConfig,
    paths: &Paths,
    metric: &str,
) -> Result<(Vec<ModelFamily>, Vec<Vec<f64>>)> {
    let n_seeds = retrain_seeds(config).len();
    let mut families = Vec::new();
    let mut groups = Vec::new();
    for family in config.model_families() {
        let mut values = Vec::with_capacity(n_seeds);
        for i in 0..n_seeds {
            let p = read_predictions(&paths.predictions(family, i, "test"))?;
            let c = confusion(&p.labels, &p.probabilities, 0.5)?;
            let v = match metric {
                "f1" => f1(&c),
                "auc" => auc(&p.labels, &p.probabilities)?,
                "normed_mcc" => normed_mcc(&c),
                other => anyhow::bail!("unknown metric {other}"),
            };
            values.push(v);
        }
        families.push(family);
        groups.push(values);
    }
    Ok((families, groups))
}

#[derive(Serialize)]
struct TukeyExport {
    metric: String,
    families: Vec<String>,
    pairs: Vec<discardbench::eval::TukeyPair>,
}

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    let n_seeds = retrain_seeds(config).len();
    let mut inputs = Vec::new();
    for family in config.model_families() {
        for i in 0..n_seeds {
            let p = paths.predictions(family, i, "test");
            anyhow::ensure!(
                p.exists(),
                "missing artifact {}: run train first",
                p.display()
            );
            inputs.push(p);
        }
    }

    // Long-format metrics CSV.
    let mut metric_rows: Vec<Vec<String>> = Vec::new();
    let mut anova_rows: Vec<Vec<String>> = Vec::new();
    let mut tukey_exports: Vec<TukeyExport> = Vec::new();
    let mut outputs = Vec::new();
    for metric in METRICS {
        let (families, groups) = metric_groups(config, paths, metric)?;
        for (family, values) in families.iter().zip(&groups) {
            for (i, v) in values.iter().enumerate() {
                metric_rows.push(vec![
                    family.code().to_string(),
                    i.to_string(),
                    metric.to_string(),
                    format!("{v}"),
                ]);
            }
        }
        if families.len() >= 2 && n_seeds >= 2 {
            let anova = anova_oneway(&groups)?;
            anova_rows.push(vec![
                metric.to_string(),
                format!("{}", anova.f_statistic),
                format!("{}", anova.p_value),
                format!("{}", anova.df_between),
                format!("{}", anova.df_within),
            ]);
            let tukey = tukey_hsd(&groups, 0.05)?;
            let mut rows: Vec<Vec<String>> = Vec::new();
            for pair in &tukey.pairs {
                rows.push(vec![
                    metric.to_string(),
                    families[pair.group_a].code().to_string(),
                    families[pair.group_b].code().to_string(),
                    format!("{}", pair.mean_diff),
                    format!("{}", pair.q_statistic),
                    format!("{}", pair.p_adjusted),
                    pair.significant.to_string(),
                ]);
            }
            write_csv_table(
                &paths.tukey_csv(metric),
                &[
                    "metric",
                    "model_a",
                    "model_b",
                    "mean_diff",
                    "q",
                    "p_adjusted",
                    "significant",
                ],
                &rows,
            )?;
            outputs.push(paths.tukey_csv(metric));
            tukey_exports.push(TukeyExport {
                metric: metric.to_string(),
                families: families.iter().map(|f| f.code().to_string()).collect(),
                pairs: tukey.pairs,
            });
        }
    }
    write_csv_table(
        &paths.metrics_csv(),
        &["model", "seed", "metric", "value"],
        &metric_rows,
    )?;
    write_csv_table(
        &paths.anova_csv(),
        &[
            "metric",
            "f_statistic",
            "p_value",
            "df_between",
            "df_within",
        ],
        &anova_rows,
    )?;
    std::fs::write(
        paths.tukey_json(),
        serde_json::to_string_pretty(&tukey_exports)?,
    )?;
    outputs.push(paths.metrics_csv());
    outputs.push(paths.anova_csv());
    outputs.push(paths.tukey_json());
    Ok((inputs, outputs))
}
