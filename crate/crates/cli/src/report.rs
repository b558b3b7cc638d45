//! Report stage: the final bundle of tables and figures, with explicit
//! gaps for stages that have not run.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;

use discardbench::matrix::{parse_csv_line, write_csv_table};
use discardbench::models::ModelFamily;

use crate::config::PipelineConfig;
use crate::stages::{Paths, StageIo};
use crate::svg;

fn read_csv(path: &std::path::Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = parse_csv_line(lines.next().unwrap_or(""));
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(parse_csv_line)
        .collect();
    Ok((header, rows))
}

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    anyhow::ensure!(
        paths.metrics_csv().exists(),
        "missing artifact {}: run evaluate first",
        paths.metrics_csv().display()
    );
    let report_dir = paths.report_dir();
    std::fs::create_dir_all(&report_dir)?;
    let mut inputs = vec![paths.metrics_csv()];
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut gaps: Vec<String> = Vec::new();

    // ---- Metric table and boxplots (column order F1, AUC, normed MCC) ----
    let (_, metric_rows) = read_csv(&paths.metrics_csv())?;
    let mut per_family_metric: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for row in &metric_rows {
        per_family_metric
            .entry((row[0].clone(), row[2].clone()))
            .or_default()
            .push(row[3].parse()?);
    }
    let families: Vec<ModelFamily> = config.model_families();
    let mut table_rows: Vec<Vec<String>> = Vec::new();
    for family in &families {
        let mean = |metric: &str| -> String {
            per_family_metric
                .get(&(family.code().to_string(), metric.to_string()))
                .map(|v| format!("{:.4}", v.iter().sum::<f64>() / v.len() as f64))
                .unwrap_or_else(|| "NA".to_string())
        };
        table_rows.push(vec![
            family.code().to_string(),
            mean("f1"),
            mean("auc"),
            mean("normed_mcc"),
        ]);
    }
    let table_path = report_dir.join("metric_table.csv");
    write_csv_table(
        &table_path,
        &["model", "f1", "auc", "normed_mcc"],
        &table_rows,
    )?;
    outputs.push(table_path);

    for (metric, title) in [
        ("f1", "Test F1 score"),
        ("auc", "Test AUC"),
        ("normed_mcc", "Test normed MCC"),
    ] {
        let labels: Vec<String> = families.iter().map(|f| f.code().to_string()).collect();
        let groups: Vec<Vec<f64>> = families
            .iter()
            .map(|f| {
                per_family_metric
                    .get(&(f.code().to_string(), metric.to_string()))
                    .cloned()
                    .unwrap_or_default()
            })
            .collect();
        let svg_text = svg::render_boxplot(title, &labels, &groups);
        let p = report_dir.join(format!("boxplot_{metric}.svg"));
        std::fs::write(&p, svg_text)?;
        outputs.push(p);
    }

    // ---- Tukey heatmaps ----
    for metric in ["f1", "auc", "normed_mcc"] {
        let src = paths.tukey_csv(metric);
        if !src.exists() {
            gaps.push(format!("tukey {metric}: not run"));
            continue;
        }
        inputs.push(src.clone());
        let (_, rows) = read_csv(&src)?;
        let labels: Vec<String> = families.iter().map(|f| f.code().to_string()).collect();
        let mut p_of: BTreeMap<(String, String), f64> = BTreeMap::new();
        for row in &rows {
            p_of.insert((row[1].clone(), row[2].clone()), row[5].parse()?);
        }
        let values = |row: usize, col: usize| -> Option<f64> {
            p_of.get(&(labels[col].clone(), labels[row].clone()))
                .or_else(|| p_of.get(&(labels[row].clone(), labels[col].clone())))
                .copied()
        };
        let svg_text = svg::render_lower_triangle_heatmap(
            &format!("Tukey-adjusted p-values ({metric})"),
            &labels,
            &values,
        );
        let p = report_dir.join(format!("tukey_heatmap_{metric}.svg"));
        std::fs::write(&p, svg_text)?;
        outputs.push(p);
    }

    // ---- Calibration ----
    if paths.brier_table().exists() {
        inputs.push(paths.brier_table());
        std::fs::copy(paths.brier_table(), report_dir.join("brier_table.csv"))?;
        outputs.push(report_dir.join("brier_table.csv"));
        for family in &families {
            let src = paths.reliability_csv(*family);
            if !src.exists() {
                continue;
            }
            inputs.push(src.clone());
            let (_, rows) = read_csv(&src)?;
            let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for row in &rows {
                series
                    .entry(row[0].clone())
                    .or_default()
                    .push((row[4].parse()?, row[5].parse()?));
            }
            let series: Vec<(String, Vec<(f64, f64)>)> = series.into_iter().collect();
            let svg_text = svg::render_calibration_curves(
                &format!("Reliability ({})", family.code()),
                &series,
            );
            let p = report_dir.join(format!("calibration_{}.svg", family.code()));
            std::fs::write(&p, svg_text)?;
            outputs.push(p);
        }
    } else {
        gaps.push("calibration: not run".to_string());
    }

    // ---- Explainability ----
    if paths.shap_importance().exists() {
        inputs.push(paths.shap_importance());
        let (_, rows) = read_csv(&paths.shap_importance())?;
        // Pooled mean |phi| per feature across models, top 10.
        let mut pooled: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for row in &rows {
            pooled
                .entry(row[1].clone())
                .or_default()
                .push((row[2].parse()?, row[3].parse()?));
        }
        let mut ranked: Vec<(String, f64, f64)> = pooled
            .into_iter()
            .map(|(feature, stats)| {
                let mean = stats.iter().map(|s| s.0).sum::<f64>() / stats.len() as f64;
                let std = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
                (feature, mean, std)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(10);
        let bar_csv: Vec<Vec<String>> = ranked
            .iter()
            .map(|(f, m, s)| vec![f.clone(), format!("{m}"), format!("{s}")])
            .collect();
        let p = report_dir.join("shap_top10.csv");
        write_csv_table(&p, &["feature", "mean_abs_phi", "std_abs_phi"], &bar_csv)?;
        outputs.push(p);
        let labels: Vec<String> = ranked.iter().map(|r| r.0.clone()).collect();
        let means: Vec<f64> = ranked.iter().map(|r| r.1).collect();
        let stds: Vec<f64> = ranked.iter().map(|r| r.2).collect();
        let svg_text = svg::render_bar_chart(
            "Top 10 features by mean |attribution|",
            &labels,
            &means,
            &stds,
        );
        let p = report_dir.join("shap_bar.svg");
        std::fs::write(&p, svg_text)?;
        outputs.push(p);

        for family in &families {
            let src = paths.shap_csv(*family);
            if !src.exists() {
                continue;
            }
            inputs.push(src.clone());
            let (_, rows) = read_csv(&src)?;
            // Top features of this family by mean |phi|.
            let mut by_feature: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for row in &rows {
                by_feature
                    .entry(row[1].clone())
                    .or_default()
                    .push((row[2].parse()?, row[3].parse()?));
            }
            let mut order: Vec<(String, f64)> = by_feature
                .iter()
                .map(|(f, pts)| {
                    (
                        f.clone(),
                        pts.iter().map(|p| p.0.abs()).sum::<f64>() / pts.len() as f64,
                    )
                })
                .collect();
            order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            order.truncate(10);
            let feat_names: Vec<String> = order.iter().map(|o| o.0.clone()).collect();
            let mut points: Vec<(usize, f64, f64)> = Vec::new();
            for (fi, name) in feat_names.iter().enumerate() {
                for &(phi, raw) in &by_feature[name] {
                    points.push((fi, phi, raw));
                }
            }
            let svg_text = svg::render_beeswarm(
                &format!("Attribution beeswarm ({})", family.code()),
                &feat_names,
                &points,
            );
            let p = report_dir.join(format!("beeswarm_{}.svg", family.code()));
            std::fs::write(&p, svg_text)?;
            outputs.push(p);
        }
    } else {
        gaps.push("explainability: not run".to_string());
    }

    let summary = serde_json::json!({
        "families": families.iter().map(|f| f.code()).collect::<Vec<_>>(),
        "gaps": gaps,
    });
    let p = report_dir.join("report.json");
    std::fs::write(&p, serde_json::to_string_pretty(&summary)?)?;
    outputs.push(p);
    Ok((inputs, outputs))
}
