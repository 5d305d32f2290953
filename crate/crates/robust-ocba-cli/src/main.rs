//! Command-line harness for fixed-budget robust ranking & selection: single
//! procedure runs, PCS sweeps, sensitivity sweeps, allocation traces, the
//! oracle validation suite, and inventory ground-truth estimation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Effective};
use config::{OutputFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "robust-ocba",
    version,
    about = "Fixed-budget robust ranking & selection procedures and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured procedure once and write its round-by-round trace.
    Run(CommonArgs),
    /// Estimate PCS over macro replications for every (procedure, c) cell.
    Pcs(CommonArgs),
    /// Sweep n0 or delta at the pinned budget N = 50*k*m.
    SweepSensitivity(CommonArgs),
    /// Run once and write per-round cumulative sample counts for plotting.
    Trace(CommonArgs),
    /// Cross-check the allocator, bounds, and oracles; exits 0 iff all pass.
    Validate(ValidateArgs),
    /// Build or refresh the inventory ground-truth cache.
    Truth(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides experiment.base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replication parallelism (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides output.format.
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Reduced-replication variant that finishes in a few seconds.
    #[arg(long)]
    quick: bool,
    /// Worker threads for replication parallelism (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(format!("expected csv or json, got {other}")),
    }
}

fn configure_workers(jobs: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if jobs.is_some() {
        eprintln!("warning: built without the parallel feature; --jobs is ignored");
    }
}

fn load_effective(args: &CommonArgs) -> Result<Effective, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let config = RunConfig::from_json(&text).map_err(CliError::Config)?;
    Ok(Effective::new(config, args.seed, args.out.clone(), args.format))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            configure_workers(args.jobs);
            commands::cmd_run(&load_effective(&args)?)
        }
        Command::Pcs(args) => {
            configure_workers(args.jobs);
            commands::cmd_pcs(&load_effective(&args)?)
        }
        Command::SweepSensitivity(args) => {
            configure_workers(args.jobs);
            commands::cmd_sweep_sensitivity(&load_effective(&args)?)
        }
        Command::Trace(args) => {
            configure_workers(args.jobs);
            commands::cmd_trace(&load_effective(&args)?)
        }
        Command::Validate(args) => {
            configure_workers(args.jobs);
            commands::cmd_validate(args.quick)
        }
        Command::Truth(args) => {
            configure_workers(args.jobs);
            commands::cmd_truth(&load_effective(&args)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
