use clap::{Parser, Subcommand};
use microcavity::pipeline::config::read_seed_schedule;
use microcavity::pipeline::{Command, Pipeline, PipelineError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Microcavity resonances and entropy-based mesh resolution, as batch commands.
#[derive(Parser)]
#[command(name = "microcavity", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration (defaults are used when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// CSV of `m,ell` rows replacing the configured disk modes.
    #[arg(long, global = true)]
    seed_schedule: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve the disk resonances and cache their fields.
    SolveDisk,
    /// Follow the ellipse mode over the deformation grid.
    SweepEllipse,
    /// Run the entropy resolution study on cached modes.
    Resolve,
    /// Fit N_O = c (nkR)^2.
    FitScaling,
    /// Summarize the resolved modes.
    Report,
    /// All of the above in order.
    Run,
}

fn load(cli: &Cli) -> Result<Pipeline, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(cache) = &cli.cache {
        config.cache = cache.clone();
    }
    if cli.workers.is_some() {
        config.workers = cli.workers;
    }
    if let Some(path) = &cli.seed_schedule {
        config.disk.modes = read_seed_schedule(path)?;
    }
    Pipeline::new(config)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let pipeline = load(cli)?;
    let command = match cli.command {
        Cmd::SolveDisk => Command::SolveDisk,
        Cmd::SweepEllipse => Command::SweepEllipse,
        Cmd::Resolve => Command::Resolve,
        Cmd::FitScaling => Command::FitScaling,
        Cmd::Report => Command::Report,
        Cmd::Run => return pipeline.run_all(),
    };
    match pipeline.run(command)?.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("microcavity: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
