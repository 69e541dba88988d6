//! `gsp`: solve, simulate and verify randomized-start first-passage problems.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gsp",
    version,
    about = "Randomized-start first-passage problems for Brownian motion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the law of the starting point and print it as JSON.
    Solve(SolveArgs),
    /// Sample (ξ, τ) pairs to CSV, with a JSON sidecar.
    Simulate(SimulateArgs),
    /// Tabulate the quadrature oracle against the target CDF.
    Oracle(OracleArgs),
    /// Sample a randomized Skorohod embedding on a wedge.
    Embed(EmbedArgs),
    /// Run the verification pipeline and emit a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
struct ProblemArgs {
    /// Target law: gamma:SHAPE,RATE | exp:RATE | stable:INDEX,SCALE | moments:MEAN,SECOND | JSON | path
    #[arg(long)]
    target: Option<String>,
    /// Boundary slope; defaults to the minimal slope k*.
    #[arg(long)]
    k: Option<f64>,
    /// JSON config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Euler,
}

#[derive(Debug, Clone, Args)]
struct SamplingArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, env = "GSP_SEED")]
    seed: Option<u64>,
    /// Worker lanes; output does not depend on this.
    #[arg(long)]
    lanes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct SimulateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Solution JSON as printed by `gsp solve`.
    #[arg(long, conflicts_with = "target")]
    solution: Option<PathBuf>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Euler time step (required for --method euler).
    #[arg(long)]
    dt: Option<f64>,
    /// Euler censoring horizon; defaults to the target's 1 - 1e-7 quantile.
    #[arg(long)]
    t_max: Option<f64>,
    /// Disable the Brownian-bridge crossing correction.
    #[arg(long)]
    no_bridge: bool,
    /// Sidecar JSON path; defaults to the output path with a .json extension.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct OracleArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, conflicts_with = "target")]
    solution: Option<PathBuf>,
    /// Number of evenly spaced times up to the target's 1 - 1e-4 quantile.
    #[arg(long)]
    points: Option<usize>,
    /// Explicit comma-separated times.
    #[arg(long, value_delimiter = ',', conflicts_with = "points")]
    t_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
struct EmbedArgs {
    /// Probability of the upper side.
    #[arg(long)]
    p_plus: Option<f64>,
    /// Law of the positive part: gamma:SHAPE,RATE | exp:RATE | JSON | path
    #[arg(long)]
    plus: Option<String>,
    /// Law of the magnitude of the negative part.
    #[arg(long)]
    minus: Option<String>,
    #[arg(long)]
    k_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k_minus: Option<f64>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report JSON path; defaults to the output path with a .json extension.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct VerifyArgs {
    /// Config with a `cases` list; the shipped cases run when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only the cases with these ids.
    #[arg(long = "case")]
    cases: Vec<String>,
    #[arg(long)]
    lanes: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Raised when `verify` completes but a verdict is not a pass.
#[derive(Debug)]
struct VerificationFailed(Vec<String>);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed for: {}", self.0.join(", "))
    }
}

impl std::error::Error for VerificationFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<VerificationFailed>().is_some() {
            return EXIT_VERIFY_FAILED;
        }
        if let Some(gsp_core::Error::InfeasibleSlope { .. }) = cause.downcast_ref::<gsp_core::Error>() {
            return EXIT_INFEASIBLE;
        }
    }
    EXIT_CONFIG
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Embed(a) => commands::embed(a),
        Command::Verify(a) => commands::verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
