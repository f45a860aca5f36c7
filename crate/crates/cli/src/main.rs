//! `sparsenet`: sparse node scheduling, fleet rebalancing and Monte-Carlo
//! validation from the command line.
//!
//! Exit codes: 0 ok, 1 internal error, 2 bad input, 3 non-binary relaxation,
//! 4 infeasible target, 5 verification flags.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "sparsenet", version, about = "Sparse control scheduling and vehicle-sharing rebalancing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "SPARSENET_OUT", default_value = "sparsenet-out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Choose control nodes for an LTI system under activation budgets.
    Schedule(ScheduleArgs),
    /// Compute a sparse rebalancing plan for a mobility scenario.
    Rebalance(RebalanceArgs),
    /// Monte-Carlo simulation checked against the mean-field model.
    Simulate(SimulateArgs),
    /// Generate a random mobility scenario.
    GenScenario(GenScenarioArgs),
    /// Check the regularity hypotheses of an instance or scenario.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Instance JSON with `a`, `b`, `horizon`, `alpha`, `beta`.
    pub instance: PathBuf,
    /// Number of time steps.
    #[arg(long, default_value_t = 400)]
    pub grid: usize,
    /// Solver, see `--list-methods`.
    #[arg(long, default_value = "relaxed-lp")]
    pub method: String,
    /// Also run the aggregate-budget top slice (default budget: sum of alpha).
    #[arg(long, num_args = 0..=1, value_name = "ALPHA_TOTAL")]
    pub baseline: Option<Option<f64>>,
    /// Print the registered methods and exit.
    #[arg(long)]
    pub list_methods: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
pub struct RebalanceArgs {
    /// Scenario JSON (explicit or generator form).
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 96)]
    pub grid: usize,
    #[arg(long, default_value = "sparse-l1")]
    pub method: String,
    /// Allow flows in both directions (controls in [-1, 1]).
    #[arg(long)]
    pub signed: bool,
    /// Compare with the minimum-energy control.
    #[arg(long)]
    pub baseline: bool,
    /// Seed of the assumption check.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub list_methods: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON or explicit-rate network JSON.
    pub input: PathBuf,
    /// Rebalancing results JSON whose controls drive the simulation.
    #[arg(long)]
    pub controls: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub runs: usize,
    /// Step length in hours (default: horizon / 2000).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Steps of the rate grid for scenarios without controls.
    #[arg(long, default_value_t = 96)]
    pub grid: usize,
    /// Largest acceptable |z| at any knot.
    #[arg(long, default_value_t = 5.0)]
    pub z_limit: f64,
    /// Keep every n-th knot in the summary.
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
pub struct GenScenarioArgs {
    #[arg(long, default_value_t = 10)]
    pub stations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fleet size.
    #[arg(long, default_value_t = 200)]
    pub total: u64,
    /// Simultaneous routes per step.
    #[arg(long)]
    pub beta: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Schedule instance or mobility scenario.
    pub input: PathBuf,
    /// Grid steps (default 400 for instances, 96 for scenarios).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Score-spread tolerance for instances.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random directions tried for scenarios.
    #[arg(long, default_value_t = 64)]
    pub trials: usize,
    #[command(flatten)]
    out: OutDir,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
    pub fn io(message: impl Into<String>) -> Self {
        Self::internal(message)
    }
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
    pub fn non_binary(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
    pub fn infeasible(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
    pub fn flagged(message: impl Into<String>) -> Self {
        Self { code: 5, message: message.into() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Schedule(a) => {
            let out = a.out.out.clone();
            commands::schedule(&a, &out)
        }
        Command::Rebalance(a) => {
            let out = a.out.out.clone();
            commands::rebalance(&a, &out)
        }
        Command::Simulate(a) => {
            let out = a.out.out.clone();
            commands::simulate(&a, &out)
        }
        Command::GenScenario(a) => {
            let out = a.out.out.clone();
            commands::gen_scenario(&a, &out)
        }
        Command::Verify(a) => {
            let out = a.out.out.clone();
            commands::verify(&a, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
