//! `qbc`: synthesize demand curves, simulate the dynamic-pricing scaler,
//! solve the offline optimum and check competitive ratios.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_count, parse_num, parse_u128};

/// Exit status 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    /// Exit status 2.
    #[error("bound violated: {0}")]
    Bound(String),
    /// Exit status 3.
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Validation(_) => 1,
            CliError::Bound(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<qbc_core::Error> for CliError {
    fn from(e: qbc_core::Error) -> Self {
        use qbc_core::Error as E;
        match e {
            E::Io(_) | E::Exists(_) => CliError::Io(e.to_string()),
            E::Parse { .. } => CliError::Io(e.to_string()),
            E::TooLarge { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qbc",
    version,
    about = "Dynamic pricing and VM scaling under quantized billing"
)]
struct Cli {
    /// key=value file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a price-demand curve and write it to a file.
    Synth(SynthArgs),
    /// Check a curve file against the model's bounds.
    Validate(ValidateArgs),
    /// Replay a trace with static pricing and/or the online scaler.
    Simulate(SimulateArgs),
    /// Solve the offline optimum for a small trace.
    Oracle(OracleArgs),
    /// Compare online loss with the optimum on random or given instances.
    Verify(VerifyArgs),
    /// Mean profit and markup over seeds for each window and p_m.
    Sweep(SweepArgs),
    /// Summarize ledger files.
    Report(ReportArgs),
}

/// Billing parameters shared by most commands.
#[derive(Debug, Args)]
struct BillingArgs {
    /// Billing cycle in slots.
    #[arg(long, value_parser = parse_count)]
    tau: Option<usize>,
    /// VM price per cycle [default: 1].
    #[arg(long, value_parser = parse_num)]
    cost: Option<f64>,
    /// Nominal price [default: the curve's].
    #[arg(long = "gamma-star", value_parser = parse_num)]
    gamma_star: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Lower marginal-revenue bound; fractions like 1/12 are accepted.
    #[arg(long = "p-m", value_parser = parse_num)]
    p_m: Option<f64>,
    /// Upper marginal-revenue bound.
    #[arg(long = "p-M", value_parser = parse_num)]
    p_max: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    tau: Option<usize>,
    #[arg(long = "gamma-star", value_parser = parse_num)]
    gamma_star: Option<f64>,
    /// Last grid price [default: p_M].
    #[arg(long = "gamma-max", value_parser = parse_num)]
    gamma_max: Option<f64>,
    /// Price subdivisions [default: 200].
    #[arg(long = "grid-steps", value_parser = parse_count)]
    grid_steps: Option<usize>,
    #[arg(long, value_parser = parse_num)]
    cost: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output curve file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    curve: Option<PathBuf>,
    #[command(flatten)]
    billing: BillingArgs,
}

/// Where demand comes from: a CSV file or the spiky generator.
#[derive(Debug, Clone, Args)]
struct TraceArgs {
    /// Trace CSV (`t,demand`); without it a synthetic spiky trace is used.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Synthetic trace length [default: 288].
    #[arg(long, value_parser = parse_count)]
    len: Option<usize>,
    /// Synthetic baseline demand [default: 5].
    #[arg(long, value_parser = parse_num)]
    base: Option<f64>,
    /// Per-slot spike probability [default: 0.08].
    #[arg(long = "spike-prob", value_parser = parse_num)]
    spike_prob: Option<f64>,
    /// Mean spike height [default: 25].
    #[arg(long = "spike-height", value_parser = parse_num)]
    spike_height: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    curve: Option<PathBuf>,
    #[command(flatten)]
    billing: BillingArgs,
    #[command(flatten)]
    trace: TraceArgs,
    /// Prediction windows to run, e.g. 0,4 [default: 0].
    #[arg(long, value_parser = config::parse_counts)]
    windows: Option<::std::vec::Vec<usize>>,
    /// Also run the static-pricing baseline.
    #[arg(long = "static")]
    with_static: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for ledgers and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    billing: BillingArgs,
    /// Largest per-slot purchase [default: ceil(max demand)].
    #[arg(long = "d-max")]
    d_max: Option<u64>,
    /// State budget [default: 1e7].
    #[arg(long, value_parser = parse_u128)]
    budget: Option<u128>,
    /// Cross-check with exhaustive search.
    #[arg(long)]
    bruteforce: bool,
    /// Write the optimal schedule as a ledger.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Check one instance instead of a random battery.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    billing: BillingArgs,
    /// Windows to check, or `all` for every w < tau [default: 0].
    #[arg(long, value_parser = config::parse_windows)]
    windows: Option<config::Windows>,
    /// Random instances [default: 500].
    #[arg(long, value_parser = parse_count)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Longest random trace [default: 10].
    #[arg(long = "max-len", value_parser = parse_count)]
    max_len: Option<usize>,
    /// Billing cycles to draw from [default: 3,4].
    #[arg(long, value_parser = config::parse_counts)]
    taus: Option<::std::vec::Vec<usize>>,
    /// Largest random demand [default: 3].
    #[arg(long = "max-demand")]
    max_demand: Option<u64>,
    #[arg(long, value_parser = parse_u128)]
    budget: Option<u128>,
    /// Write the per-run ratio CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Windows, e.g. 0,1,2,3,4.
    #[arg(long, value_parser = config::parse_counts)]
    windows: Option<::std::vec::Vec<usize>>,
    /// Values of p_m, e.g. 1/12,3/12.
    #[arg(long = "p-m", value_parser = config::parse_nums)]
    p_m: Option<::std::vec::Vec<f64>>,
    #[arg(long = "p-M", value_parser = parse_num)]
    p_max: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    tau: Option<usize>,
    #[arg(long = "gamma-star", value_parser = parse_num)]
    gamma_star: Option<f64>,
    #[arg(long, value_parser = parse_num)]
    cost: Option<f64>,
    #[command(flatten)]
    trace: TraceArgs,
    /// Replicates per configuration [default: 20].
    #[arg(long, value_parser = parse_count)]
    seeds: Option<usize>,
    /// First replicate seed [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Ledger CSV files.
    ledgers: Vec<PathBuf>,
    /// Output summary CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
