//! `bench` command-line interface.

use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;

use discardbench_cli::config::PipelineConfig;
use discardbench_cli::stages::{run_stage, Stage, ALL_STAGES};

/// Donor-kidney discard prediction benchmark pipeline.
#[derive(Parser)]
#[command(name = "bench", version, about)]
struct Cli {
    /// Stage to run: synth, engineer, select, tune, train, evaluate,
    /// calibrate, explain, report, or `all`.
    stage: String,

    /// Pipeline configuration file (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Worker thread cap.
    #[arg(long)]
    jobs: Option<usize>,

    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Restore the published study-scale budgets and full search spaces.
    #[arg(long)]
    paper_budgets: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if cli.paper_budgets {
        config.apply_paper_budgets();
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    config.validate()?;

    if cli.stage == "all" {
        for stage in ALL_STAGES {
            eprintln!("[bench] running stage {stage}");
            run_stage(stage, &config)?;
        }
    } else {
        let stage: Stage = cli.stage.parse()?;
        eprintln!("[bench] running stage {stage}");
        run_stage(stage, &config)?;
    }
    Ok(())
}
