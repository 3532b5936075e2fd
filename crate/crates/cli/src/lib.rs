//! Command-line front end for the AoI scheduling library.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// A problem with the user's input. Maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Outcome of a command that completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Parser)]
#[command(name = "aoi-ofdma", version, about = "AoI-optimal blind OFDMA scheduling in the finite-blocklength regime")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form cluster size for the configured flat channel
    ClusterSize(ClusterSizeArgs),
    /// Run a Monte Carlo experiment and write CSV results
    Simulate(SimulateArgs),
    /// Three-policy comparison: optimal clustering, l = 1, URLLC sizing
    Benchmark(SimulateArgs),
    /// Exhaustively check round-robin optimality for a small system
    DominanceCheck(DominanceArgs),
    /// One-shot sub-carrier assignment on a random channel draw
    Assign(AssignArgs),
}

#[derive(Debug, Args)]
pub struct ClusterSizeArgs {
    /// experiment file (defaults apply when omitted)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// also run the exhaustive search and report agreement
    #[arg(long)]
    pub oracle: bool,
    /// sweep one input, e.g. `M=200..2000` or `tau=32..512:32`
    #[arg(long)]
    pub sweep: Option<String>,
    /// CSV destination for a sweep (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub replications: Option<u32>,
    #[arg(long)]
    pub slots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DominanceArgs {
    #[arg(long)]
    pub ues: usize,
    #[arg(long, default_value_t = 1)]
    pub cluster_size: usize,
    #[arg(long)]
    pub slots: usize,
    /// error rates, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssignMode {
    Blind,
    Recursive,
    Both,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// defaults to the configured (or derived) cluster size
    #[arg(long)]
    pub cluster_size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = AssignMode::Both)]
    pub mode: AssignMode,
}

/// Exit code for a finished run or an error.
pub fn exit_code(result: &anyhow::Result<Verdict>) -> u8 {
    match result {
        Ok(Verdict::Pass) => 0,
        Ok(Verdict::Fail) => 1,
        Err(e) if is_config_error(e) => 2,
        Err(_) => 1,
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>()
            || matches!(
                c.downcast_ref::<aoi_core::Error>(),
                Some(
                    aoi_core::Error::Config(_)
                        | aoi_core::Error::Domain(_)
                        | aoi_core::Error::InfeasiblePayload { .. }
                        | aoi_core::Error::LambertDomain { .. }
                        | aoi_core::Error::EnumerationBound { .. }
                )
            )
    })
}

pub fn run(cli: Cli) -> anyhow::Result<Verdict> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::ClusterSize(a) => commands::cluster_size(&a, &mut out),
        Command::Simulate(a) => commands::simulate(&a, &mut out),
        Command::Benchmark(a) => commands::benchmark(&a, &mut out),
        Command::DominanceCheck(a) => commands::dominance_check(&a, &mut out),
        Command::Assign(a) => commands::assign(&a, &mut out),
    }
}
