//! Pipeline configuration, loaded from a JSON file and adjustable from the
//! command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use discardbench::features::EngineeringConfig;
use discardbench::models::{ModelFamily, SpaceProfile};
use discardbench::synth::SynthConfig;

/// Search and retraining budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    /// Evaluated genomes per family in the feature selection.
    pub selection_trials: usize,
    pub selection_population: usize,
    /// TPE trials per family.
    pub tpe_trials: usize,
    /// Retraining seeds per family.
    pub seeds: usize,
    /// Feature-count penalty coefficient.
    pub lambda: f64,
    /// Inner randomized-search trials per genome.
    pub inner_trials: usize,
    /// Folds of the selection-time cross-validation.
    pub selection_folds: usize,
    /// Folds of the tuning-time cross-validation.
    pub tuning_folds: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            selection_trials: 200,
            selection_population: 50,
            tpe_trials: 40,
            seeds: 10,
            lambda: 0.0005,
            inner_trials: 10,
            selection_folds: 3,
            tuning_folds: 5,
        }
    }
}

impl Budgets {
    /// The published study-scale budgets.
    pub fn paper() -> Budgets {
        Budgets {
            selection_trials: 1000,
            selection_population: 50,
            tpe_trials: 300,
            seeds: 30,
            ..Budgets::default()
        }
    }
}

/// Explainability stage settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    /// Training rows kept as background (seeded stratified subsample).
    pub background_rows: usize,
    /// Test rows explained.
    pub explain_rows: usize,
    /// Antithetic permutation pairs per explained row.
    pub n_permutations: usize,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            background_rows: 50,
            explain_rows: 40,
            n_permutations: 5,
        }
    }
}

/// Training-loop knobs held outside the hyperparameter spaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingKnobs {
    pub mlp_max_epochs: usize,
    pub mlp_patience: usize,
    pub mlp_batch_size: usize,
    pub logreg_max_epochs: usize,
    pub logreg_tol: f64,
}

impl Default for TrainingKnobs {
    fn default() -> Self {
        TrainingKnobs {
            mlp_max_epochs: 120,
            mlp_patience: 12,
            mlp_batch_size: 128,
            logreg_max_epochs: 80,
            logreg_tol: 1e-5,
        }
    }
}

impl TrainingKnobs {
    pub fn fit_options(&self) -> discardbench::models::FitOptions {
        discardbench::models::FitOptions {
            mlp_max_epochs: self.mlp_max_epochs,
            mlp_patience: self.mlp_patience,
            mlp_batch_size: self.mlp_batch_size,
            logreg_max_epochs: self.logreg_max_epochs,
            logreg_tol: self.logreg_tol,
        }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Cohort JSONL path; the synth stage writes it, later stages read it.
    pub cohort_path: PathBuf,
    pub work_dir: PathBuf,
    pub master_seed: u64,
    /// Family codes to run (DT, LR, RF, GBT, MLP, ENS).
    pub families: Vec<String>,
    pub budgets: Budgets,
    pub space_profile: SpaceProfile,
    pub synth: SynthConfig,
    pub engineering: EngineeringConfig,
    pub shap: ShapConfig,
    pub training: TrainingKnobs,
    /// Cheaper knobs for the selection stage's inner randomized search.
    pub selection_training: TrainingKnobs,
    pub calibration_bins: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cohort_path: PathBuf::from("work/cohort.jsonl"),
            work_dir: PathBuf::from("work"),
            master_seed: 0,
            families: ["DT", "LR", "RF", "GBT", "MLP", "ENS"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            budgets: Budgets::default(),
            space_profile: SpaceProfile::Desk,
            synth: SynthConfig::default(),
            engineering: EngineeringConfig::default(),
            shap: ShapConfig::default(),
            training: TrainingKnobs::default(),
            selection_training: TrainingKnobs {
                mlp_max_epochs: 12,
                mlp_patience: 4,
                mlp_batch_size: 384,
                logreg_max_epochs: 40,
                logreg_tol: 1e-4,
            },
            calibration_bins: 10,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budgets.selection_trials < self.budgets.selection_population {
            bail!("selection_trials must be at least the population size");
        }
        if self.budgets.seeds == 0 || self.budgets.tpe_trials == 0 {
            bail!("budgets must be positive");
        }
        for code in &self.families {
            if ModelFamily::from_code(code).is_none() {
                bail!("unknown model family '{code}'");
            }
        }
        if self.model_families().contains(&ModelFamily::Ensemble) {
            for base in [
                ModelFamily::LogisticRegression,
                ModelFamily::RandomForest,
                ModelFamily::GradientBoosting,
                ModelFamily::Mlp,
            ] {
                if !self.model_families().contains(&base) {
                    bail!("the ensemble requires {} among the families", base.code());
                }
            }
        }
        Ok(())
    }

    /// Parsed family list, in configuration order.
    pub fn model_families(&self) -> Vec<ModelFamily> {
        self.families
            .iter()
            .filter_map(|c| ModelFamily::from_code(c))
            .collect()
    }

    /// Families that get their own feature selection and tuning.
    pub fn base_families(&self) -> Vec<ModelFamily> {
        self.model_families()
            .into_iter()
            .filter(|f| *f != ModelFamily::Ensemble)
            .collect()
    }

    /// Applies the published study-scale budgets and full search spaces.
    pub fn apply_paper_budgets(&mut self) {
        self.budgets = Budgets {
            lambda: self.budgets.lambda,
            inner_trials: self.budgets.inner_trials,
            selection_folds: self.budgets.selection_folds,
            tuning_folds: self.budgets.tuning_folds,
            ..Budgets::paper()
        };
        self.space_profile = SpaceProfile::Full;
        self.training = TrainingKnobs {
            mlp_max_epochs: 500,
            mlp_patience: 20,
            mlp_batch_size: 128,
            logreg_max_epochs: 200,
            logreg_tol: 1e-6,
        };
        self.selection_training = self.training.clone();
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
