//! `funcnet`: stagewise and end-to-end runs of functional-network experiments.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
//! failure (missing upstream artifact, I/O, a failing stage).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use funcnet::pipeline::{DensitySpec, ExperimentConfig, Pipeline, PipelineError, Stage};

#[derive(Parser)]
#[command(name = "funcnet", version, about = "Functional networks of fully connected classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every model of the experiment
    Train(Common),
    /// Record hidden activations of the trained models
    Capture(Common),
    /// Correlation-based connectivity matrices from saved activations
    Connect(Common),
    /// Functional networks at every configured density
    Binarize(Common),
    /// Graph metrics over the density sweep and small-world coefficients
    Gta(Common),
    /// Persistence diagrams and Betti curves
    Tda(Common),
    /// Hierarchical clustering of the models by Betti distance and accuracy
    Cluster(Common),
    /// Assemble report.json and the tidy gta.csv
    Report(Common),
    /// Run every enabled stage, or only `--stage`
    Run {
        #[command(flatten)]
        common: Common,
        /// One stage alone: train, capture, connect, binarize, gta, tda, cluster or report
        #[arg(long)]
        stage: Option<Stage>,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config's
    #[arg(long)]
    out: Option<PathBuf>,
    /// Models processed in parallel (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Recompute stages even when their outputs are current
    #[arg(long)]
    force: bool,
    /// Sweep densities as start:stop:step, overriding the config's
    #[arg(long)]
    densities: Option<DensitySpec>,
}

fn pipeline(c: &Common) -> Result<Pipeline, PipelineError> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(d) = &c.densities {
        cfg.densities = d.clone();
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    if c.workers == Some(0) {
        return Err(PipelineError::Config("--workers must be at least 1".into()));
    }
    Ok(Pipeline::new(cfg)?.with_workers(c.workers).with_force(c.force))
}

fn run_stages(c: &Common, stages: Option<Vec<Stage>>) -> Result<(), PipelineError> {
    let p = pipeline(c)?;
    let stages = stages.unwrap_or_else(|| p.enabled_stages());
    for stage in stages {
        let outcome = p.run_stage(stage)?;
        eprintln!("{stage}: ran {}, up to date {}", outcome.ran, outcome.skipped);
    }
    if p.output_dir().join("report.json").exists() {
        println!("{}", p.output_dir().join("report.json").display());
    } else {
        println!("{}", p.output_dir().display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Train(c) => run_stages(c, Some(vec![Stage::Train])),
        Command::Capture(c) => run_stages(c, Some(vec![Stage::Capture])),
        Command::Connect(c) => run_stages(c, Some(vec![Stage::Connect])),
        Command::Binarize(c) => run_stages(c, Some(vec![Stage::Binarize])),
        Command::Gta(c) => run_stages(c, Some(vec![Stage::Gta])),
        Command::Tda(c) => run_stages(c, Some(vec![Stage::Tda])),
        Command::Cluster(c) => run_stages(c, Some(vec![Stage::Cluster])),
        Command::Report(c) => run_stages(c, Some(vec![Stage::Report])),
        Command::Run { common, stage } => run_stages(common, stage.map(|s| vec![s])),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
