//! Pipeline stages, resumable through filesystem artifacts.

mod calibrate;
mod engineer;
mod evaluate;
mod explain;
mod select;
mod synth;
mod train;
mod tune;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

use discardbench::dataset::{LabeledCohort, StandardScaler};
use discardbench::matrix::{parse_csv_line, DenseMatrix, FeatureMatrix};
use discardbench::models::ModelFamily;

use crate::config::PipelineConfig;
use crate::manifest::{hash_bytes, RunManifest};
use crate::report;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Engineer,
    Select,
    Tune,
    Train,
    Evaluate,
    Calibrate,
    Explain,
    Report,
}

pub const ALL_STAGES: [Stage; 9] = [
    Stage::Synth,
    Stage::Engineer,
    Stage::Select,
    Stage::Tune,
    Stage::Train,
    Stage::Evaluate,
    Stage::Calibrate,
    Stage::Explain,
    Stage::Report,
];

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Engineer => "engineer",
            Stage::Select => "select",
            Stage::Tune => "tune",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Calibrate => "calibrate",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }

    /// The stage whose artifacts this stage consumes.
    pub fn upstream(&self) -> Option<Stage> {
        match self {
            Stage::Synth => None,
            Stage::Engineer => Some(Stage::Synth),
            Stage::Select => Some(Stage::Engineer),
            Stage::Tune => Some(Stage::Select),
            Stage::Train => Some(Stage::Tune),
            Stage::Evaluate => Some(Stage::Train),
            Stage::Calibrate => Some(Stage::Evaluate),
            Stage::Explain => Some(Stage::Evaluate),
            Stage::Report => Some(Stage::Evaluate),
        }
    }
}

impl FromStr for Stage {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Stage> {
        ALL_STAGES
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| anyhow::anyhow!("unknown stage '{s}'"))
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Well-known artifact paths inside the work directory.
pub struct Paths {
    pub work: PathBuf,
    pub cohort: PathBuf,
}

impl Paths {
    pub fn new(config: &PipelineConfig) -> Paths {
        Paths {
            work: config.work_dir.clone(),
            cohort: config.cohort_path.clone(),
        }
    }

    pub fn manifest(&self) -> PathBuf {
        self.work.join("manifest.json")
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.work.join("ground_truth.json")
    }

    pub fn split(&self) -> PathBuf {
        self.work.join("split.json")
    }

    pub fn schema(&self) -> PathBuf {
        self.work.join("schema.json")
    }

    pub fn scaler(&self) -> PathBuf {
        self.work.join("scaler.json")
    }

    pub fn matrix(&self, role: &str) -> PathBuf {
        self.work.join(format!("matrix_{role}.csv"))
    }

    pub fn matrix_schema(&self) -> PathBuf {
        self.work.join("matrix_schema.json")
    }

    pub fn selected(&self, family: ModelFamily) -> PathBuf {
        self.work.join(format!("selected_{}.json", family.code()))
    }

    pub fn select_ledger(&self, family: ModelFamily) -> PathBuf {
        self.work
            .join(format!("select_ledger_{}.jsonl", family.code()))
    }

    pub fn tuned(&self, family: ModelFamily) -> PathBuf {
        self.work.join(format!("tuned_{}.json", family.code()))
    }

    pub fn tune_ledger(&self, family: ModelFamily) -> PathBuf {
        self.work
            .join(format!("tune_ledger_{}.jsonl", family.code()))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.work.join("models")
    }

    pub fn model(&self, family: ModelFamily, seed_index: usize) -> PathBuf {
        self.models_dir()
            .join(format!("{}_{seed_index:03}.json", family.code()))
    }

    pub fn predictions_dir(&self) -> PathBuf {
        self.work.join("predictions")
    }

    pub fn predictions(&self, family: ModelFamily, seed_index: usize, role: &str) -> PathBuf {
        self.predictions_dir()
            .join(format!("{}_{seed_index:03}_{role}.csv", family.code()))
    }

    pub fn metrics_csv(&self) -> PathBuf {
        self.work.join("metrics.csv")
    }

    pub fn anova_csv(&self) -> PathBuf {
        self.work.join("anova.csv")
    }

    pub fn tukey_csv(&self, metric: &str) -> PathBuf {
        self.work.join(format!("tukey_{metric}.csv"))
    }

    pub fn tukey_json(&self) -> PathBuf {
        self.work.join("tukey.json")
    }

    pub fn brier_table(&self) -> PathBuf {
        self.work.join("brier_table.csv")
    }

    pub fn reliability_csv(&self, family: ModelFamily) -> PathBuf {
        self.work.join(format!("reliability_{}.csv", family.code()))
    }

    pub fn calibration_json(&self, family: ModelFamily) -> PathBuf {
        self.work
            .join(format!("calibration_{}.json", family.code()))
    }

    pub fn shap_csv(&self, family: ModelFamily) -> PathBuf {
        self.work.join(format!("shap_{}.csv", family.code()))
    }

    pub fn shap_importance(&self) -> PathBuf {
        self.work.join("shap_importance.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.work.join("report")
    }
}

fn require(path: &Path, prior: Stage) -> Result<PathBuf> {
    if !path.exists() {
        bail!(
            "missing artifact {}: run {} first",
            path.display(),
            prior.name()
        );
    }
    Ok(path.to_path_buf())
}

/// Executes one stage, then appends a manifest entry hashing its inputs
/// and outputs.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(&config.work_dir)
        .with_context(|| format!("creating {}", config.work_dir.display()))?;
    let paths = Paths::new(config);
    let start = std::time::Instant::now();
    let (inputs, outputs) = match stage {
        Stage::Synth => synth::run(config, &paths)?,
        Stage::Engineer => engineer::run(config, &paths)?,
        Stage::Select => select::run(config, &paths)?,
        Stage::Tune => tune::run(config, &paths)?,
        Stage::Train => train::run(config, &paths)?,
        Stage::Evaluate => evaluate::run(config, &paths)?,
        Stage::Calibrate => calibrate::run(config, &paths)?,
        Stage::Explain => explain::run(config, &paths)?,
        Stage::Report => report::run(config, &paths)?,
    };
    let duration_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut manifest = RunManifest::load_or_default(&paths.manifest());
    let config_hash = hash_bytes(serde_json::to_string(config)?.as_bytes());
    manifest.record(stage.name(), &inputs, &outputs, config_hash, duration_ms)?;
    manifest.save(&paths.manifest())?;
    Ok(())
}

// ---- shared helpers used by the stage implementations ----

pub(crate) type StageIo = (Vec<PathBuf>, Vec<PathBuf>);

pub(crate) fn load_cohort(paths: &Paths) -> Result<LabeledCohort> {
    require(&paths.cohort, Stage::Synth)?;
    Ok(LabeledCohort::read_jsonl(&paths.cohort)?)
}

/// Loads a split matrix and standardizes it with the train-fitted scaler.
pub(crate) fn load_scaled(
    paths: &Paths,
    role: &str,
) -> Result<(FeatureMatrix, DenseMatrix, Vec<u8>)> {
    require(&paths.matrix(role), Stage::Engineer)?;
    require(&paths.scaler(), Stage::Engineer)?;
    let matrix = FeatureMatrix::read_csv(&paths.matrix(role))?;
    let scaler = StandardScaler::read_json(&paths.scaler())?;
    let scaled = scaler.apply(&matrix)?;
    let labels = scaled.labels.clone();
    let dense = scaled.to_dense()?;
    Ok((matrix, dense, labels))
}

/// Selected feature subset of one family.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub(crate) struct SelectedFeatures {
    pub family: String,
    pub genome: String,
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    pub loss: f64,
}

pub(crate) fn load_selected(paths: &Paths, family: ModelFamily) -> Result<SelectedFeatures> {
    let p = require(&paths.selected(family), Stage::Select)?;
    Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?)
}

/// Tuned hyperparameters of one family.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub(crate) struct TunedConfig {
    pub family: String,
    pub hp: discardbench::models::HpAssignment,
    pub loss: f64,
}

pub(crate) fn load_tuned(paths: &Paths, family: ModelFamily) -> Result<TunedConfig> {
    let p = require(&paths.tuned(family), Stage::Tune)?;
    Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?)
}

/// One persisted prediction set.
pub(crate) struct Predictions {
    pub donor_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub raw_scores: Vec<f64>,
    pub probabilities: Vec<f64>,
}

pub(crate) fn write_predictions(
    path: &Path,
    donor_ids: &[String],
    labels: &[u8],
    raw_scores: &[f64],
    probabilities: &[f64],
) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..donor_ids.len())
        .map(|i| {
            vec![
                donor_ids[i].clone(),
                labels[i].to_string(),
                format!("{}", raw_scores[i]),
                format!("{}", probabilities[i]),
            ]
        })
        .collect();
    discardbench::matrix::write_csv_table(
        path,
        &["donor_id", "label", "raw_score", "probability"],
        &rows,
    )?;
    Ok(())
}

pub(crate) fn read_predictions(path: &Path) -> Result<Predictions> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading predictions {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty predictions file")?;
    if header != "donor_id,label,raw_score,probability" {
        bail!("unexpected predictions header in {}", path.display());
    }
    let mut out = Predictions {
        donor_ids: vec![],
        labels: vec![],
        raw_scores: vec![],
        probabilities: vec![],
    };
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields = parse_csv_line(line);
        out.donor_ids.push(fields[0].clone());
        out.labels.push(fields[1].parse()?);
        out.raw_scores.push(fields[2].parse()?);
        out.probabilities.push(fields[3].parse()?);
    }
    Ok(out)
}

/// Seed list shared by every family during retraining.
pub(crate) fn retrain_seeds(config: &PipelineConfig) -> Vec<u64> {
    (0..config.budgets.seeds)
        .map(|i| discardbench::rng::derive_seed(config.master_seed, 0x7e41, i as u64))
        .collect()
}

pub(crate) const SALT_SYNTH_STAGE: u64 = 0x0157;
pub(crate) const SALT_SPLIT_STAGE: u64 = 0x0257;
pub(crate) const SALT_SELECT_STAGE: u64 = 0x0357;
pub(crate) const SALT_TUNE_STAGE: u64 = 0x0457;
pub(crate) const SALT_SHAP_STAGE: u64 = 0x0557;
