//! `hriesz`: reproducible experiments with the Heisenberg Riesz transform.
//!
//! Exit status: 0 on success, 1 when a run completes with a finding (a failed
//! kernel invariant, or a growth certificate above its threshold), 2 for
//! configuration errors and 3 for data errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "hriesz",
    version,
    about = "Heisenberg group Riesz transform experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the kernel's closed forms, symmetries and standard-kernel bounds.
    KernelCheck(RunArgs),
    /// Estimate truncated operator norms over a list of truncation radii.
    NormProfile(RunArgs),
    /// Search for a high-density cube and build the witness iteration from it.
    GrowthWitness(RunArgs),
    /// Build the vertical-plane Cantor measure and profile its operator norms.
    Cantor(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

type Runner = fn(&ExperimentConfig) -> Result<commands::Finding, error::CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&RunArgs, Runner) = match &cli.command {
        Command::KernelCheck(a) => (a, commands::kernel_check),
        Command::NormProfile(a) => (a, commands::norm_profile),
        Command::GrowthWitness(a) => (a, commands::growth_witness_cmd),
        Command::Cantor(a) => (a, commands::cantor),
    };
    let result = ExperimentConfig::load(&args.config, args.seed, args.out.as_deref())
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("hriesz: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
