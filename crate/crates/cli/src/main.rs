//! `mot`: price bounds and super-hedges for path-dependent claims on
//! truncated cadlag path lattices.
//!
//! Exit codes are a stable contract: 0 success, 1 configuration or input
//! error, 2 infeasible problem (truncation artifact or convex-order
//! failure), 3 solver failure, 4 hedge verification found violations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod run;

use config::RunConfig;

/// A failure, classified by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1: bad flags, config, or input files.
    Config(String),
    /// Exit 2: the problem has no solution on this lattice.
    Infeasible(String),
    /// Exit 3: the solver or verifier failed internally.
    Solver(String),
    /// Exit 4: super-replication violations found.
    Hedge(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Hedge(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Infeasible(m)
            | CliError::Solver(m)
            | CliError::Hedge(m) => m,
        }
    }
}

impl From<mot_core::mot::MOTError> for CliError {
    fn from(e: mot_core::mot::MOTError) -> Self {
        use mot_core::mot::MOTError::*;
        match e {
            BadPayoff { .. } | BadDates | BadMarginal(_) | BadBudget | BadGammaBound => {
                CliError::Config(e.to_string())
            }
            TruncationInfeasible { .. } | TruncationJointlyInfeasible | ConvexOrderViolation(..) => {
                CliError::Infeasible(e.to_string())
            }
            HedgeVerification(_) | Lp(_) | Measure(_) => CliError::Solver(e.to_string()),
        }
    }
}

impl From<mot_core::lattice::LatticeError> for CliError {
    fn from(e: mot_core::lattice::LatticeError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<mot_core::tree::TreeError> for CliError {
    fn from(e: mot_core::tree::TreeError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<mot_core::sampling::SamplingError> for CliError {
    fn from(e: mot_core::sampling::SamplingError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<mot_core::payoffs::PayoffError> for CliError {
    fn from(e: mot_core::payoffs::PayoffError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<mot_core::measures::MeasureError> for CliError {
    fn from(e: mot_core::measures::MeasureError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<mot_core::paths::PathError> for CliError {
    fn from(e: mot_core::paths::PathError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<mot_core::hedging::HedgeError> for CliError {
    fn from(e: mot_core::hedging::HedgeError) -> Self {
        CliError::Solver(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "mot",
    version,
    about = "Martingale optimal transport price bounds and hedges on path lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Force the exact Prokhorov computation (small supports only).
    #[arg(long)]
    exact_prokhorov: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one pricing problem and write the solution.
    Price(CommonArgs),
    /// Sweep the refinement level and tabulate values against the bounds.
    Converge(CommonArgs),
    /// Perturb the marginal and tabulate value gaps against Prokhorov.
    Continuity(CommonArgs),
    /// Lift a dual solve and audit super-replication on sampled paths.
    HedgeVerify(CommonArgs),
    /// Prokhorov distance, l1 deviation, and convex-order certificates.
    MeasureTools(CommonArgs),
    /// Skorokhod and modified distances between two explicit paths.
    Distance(CommonArgs),
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (args, runner): (&CommonArgs, fn(RunConfig, u64, &std::path::Path) -> _) =
        match &command {
            Command::Price(a) => (a, run::cmd_price),
            Command::Converge(a) => (a, run::cmd_converge),
            Command::Continuity(a) => (a, run::cmd_continuity),
            Command::HedgeVerify(a) => (a, run::cmd_hedge_verify),
            Command::MeasureTools(a) => {
                let mut cfg = RunConfig::load(&a.config)?;
                let seed = cfg.resolve_seed(a.seed);
                return run::cmd_measure_tools(cfg, seed, &a.out, a.exact_prokhorov);
            }
            Command::Distance(a) => (a, run::cmd_distance),
        };
    let mut cfg = RunConfig::load(&args.config)?;
    let seed = cfg.resolve_seed(args.seed);
    runner(cfg, seed, &args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
