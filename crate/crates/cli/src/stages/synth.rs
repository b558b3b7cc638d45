//! Synth stage: generate the synthetic cohort and its ground truth.

use anyhow::Result;

use discardbench::rng::derive_seed;
use discardbench::synth::generate_cohort;

use crate::config::PipelineConfig;

use super::{Paths, StageIo, SALT_SYNTH_STAGE};

pub fn run(config: &PipelineConfig, paths: &Paths) -> Result<StageIo> {
    let mut synth_config = config.synth.clone();
    // The master seed drives every stage; the config's own seed field is
    // only honored for standalone generation.
    synth_config.seed = derive_seed(config.master_seed, SALT_SYNTH_STAGE, synth_config.seed);
    let (cohort, truth) = generate_cohort(&synth_config)?;
    if let Some(parent) = paths.cohort.parent() {
        std::fs::create_dir_all(parent)?;
    }
    cohort.write_jsonl(&paths.cohort)?;
    truth.write_json(&paths.ground_truth())?;
    Ok((vec![], vec![paths.cohort.clone(), paths.ground_truth()]))
}
