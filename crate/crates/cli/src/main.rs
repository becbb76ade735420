//! `itosample` command-line front end.

mod commands;
mod config;
mod error;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "itosample",
    version,
    about = "Discretized diffusion samplers and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run chains and write snapshots and final particles.
    Sample(Common),
    /// Estimate strong orders from coupled runs.
    Order(Common),
    /// Distances between sample files.
    Metrics(Common),
    /// Stationary-bias sweep or scheme comparison.
    Experiment(Common),
    /// Sampled uniform-dissipativity margin of a model.
    Dissipativity(Common),
    /// Generate a synthetic logistic-regression dataset.
    GenBlr(Common),
}

#[derive(Args)]
struct Common {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
}

type Handler = fn(&RunConfig, &std::path::Path) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, f): (&Common, Handler) = match &cli.command {
        Cmd::Sample(c) => (c, commands::sample),
        Cmd::Order(c) => (c, commands::order),
        Cmd::Metrics(c) => (c, commands::metrics),
        Cmd::Experiment(c) => (c, commands::experiment),
        Cmd::Dissipativity(c) => (c, commands::dissipativity),
        Cmd::GenBlr(c) => (c, commands::gen_blr),
    };
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    f(&cfg, &out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
