//! `steepflow` command-line front end: experiment sweeps, single runs,
//! geometry queries and the built-in numeric self-check.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 when every failure
//! in a sweep was a divergence (an expected outcome for unstable
//! configurations).

mod commands;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "steepflow",
    version,
    about = "Steepest-descent flows on deep diagonal linear networks",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one regression configuration and write its trajectory.
    RunRegression(RunRegressionArgs),
    /// Train one classification configuration and write its margin profile.
    RunClassification(RunClassificationArgs),
    /// Sweep (q, depth) on the overdetermined task and compare
    /// steps-to-threshold.
    SaddleEscape(SaddleEscapeArgs),
    /// Sweep depth and weight-decay mode on the underdetermined task and
    /// tabulate balance/ground-truth distances.
    BalanceTable(BalanceTableArgs),
    /// Compare the reparameterized flow against the mirror-flow integrator.
    Equivalence(EquivalenceArgs),
    /// Print metric, exponent, stability class, coercivity and regularizer
    /// values as JSON.
    Geometry(GeometryArgs),
    /// Run the built-in gradient and closed-form self-checks.
    Check(CheckArgs),
}

/// Flags shared by every experiment subcommand.
#[derive(Debug, Args)]
struct CommonArgs {
    /// Output directory; a timestamp+hash suffixed run directory is created
    /// inside it unless --force is given.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Write directly into --out, overwriting existing files.
    #[arg(long, default_value_t = false)]
    force: bool,
    /// Worker threads for the grid (1 = sequential, 0 = all cores).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Base seed for task generation and minibatch streams.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Record a trajectory row every this many steps.
    #[arg(long, default_value_t = 100)]
    record_every: u64,
    /// Flat key=value file; each line expands to --key value.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunRegressionArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Feature count n.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Sample count k.
    #[arg(long, default_value_t = 80)]
    k: usize,
    /// Ground-truth support size s (leading ones).
    #[arg(long, default_value_t = 5)]
    s: usize,
    /// Reparameterization depth L.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Steepest-descent dual exponent q in [1, 2].
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Step size (per step, dimensionless).
    #[arg(long, default_value_t = 1e-4)]
    eta: f64,
    /// Step count.
    #[arg(long, default_value_t = 200_000)]
    steps: u64,
    /// Near-saddle init scale for layers 2..L.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Weight-decay mode: none, coupled or decoupled.
    #[arg(long, default_value = "none")]
    wd_mode: String,
    /// Weight-decay strength alpha.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Minibatch size (0 = full batch).
    #[arg(long, default_value_t = 0)]
    batch_size: usize,
    /// Optimizer: steepest or adam.
    #[arg(long, default_value = "steepest")]
    optimizer: String,
}

#[derive(Debug, Args)]
struct RunClassificationArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Feature count n.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Sample count k.
    #[arg(long, default_value_t = 80)]
    k: usize,
    /// Ground-truth support size s.
    #[arg(long, default_value_t = 2)]
    s: usize,
    /// Reparameterization depth L.
    #[arg(long, default_value_t = 10)]
    depth: usize,
    /// Steepest-descent dual exponent q in [1, 2].
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Step size.
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    /// Step count.
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    /// Near-saddle init scale.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Minibatch size (0 = full batch).
    #[arg(long, default_value_t = 0)]
    batch_size: usize,
    /// Optimizer: steepest or adam.
    #[arg(long, default_value = "steepest")]
    optimizer: String,
}

#[derive(Debug, Args)]
struct SaddleEscapeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Feature count n.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Sample count k (overdetermined default).
    #[arg(long, default_value_t = 300)]
    k: usize,
    /// Ground-truth support size s.
    #[arg(long, default_value_t = 5)]
    s: usize,
    /// Depth grid, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    depth: Vec<usize>,
    /// q grid, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    q: Vec<f64>,
    /// Step size.
    #[arg(long, default_value_t = 1e-4)]
    eta: f64,
    /// Step count; defaults to 200000, or 1000000 with --full-protocol.
    #[arg(long)]
    steps: Option<u64>,
    /// Restore the full-length protocol (1e6 steps).
    #[arg(long, default_value_t = false)]
    full_protocol: bool,
    /// Near-saddle init scale.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Loss level defining steps-to-threshold.
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct BalanceTableArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Feature count n.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Sample count k (underdetermined default).
    #[arg(long, default_value_t = 80)]
    k: usize,
    /// Ground-truth support size s.
    #[arg(long, default_value_t = 5)]
    s: usize,
    /// Depth grid, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,10")]
    depth: Vec<usize>,
    /// q exponent shared by the grid.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Weight-decay strengths; each yields a coupled and a decoupled row.
    #[arg(long, value_delimiter = ',', default_value = "0.001")]
    alpha: Vec<f64>,
    /// Step size.
    #[arg(long, default_value_t = 1e-4)]
    eta: f64,
    /// Step count; defaults to 200000, or 1000000 with --full-protocol.
    #[arg(long)]
    steps: Option<u64>,
    /// Restore the full-length protocol (1e6 steps).
    #[arg(long, default_value_t = false)]
    full_protocol: bool,
    /// Near-saddle init scale.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Minibatch size (0 = full batch).
    #[arg(long, default_value_t = 0)]
    batch_size: usize,
}

#[derive(Debug, Args)]
struct EquivalenceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Problem width n (must stay scalar-friendly, n <= 4).
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// q grid, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    q: Vec<f64>,
    /// Depth grid, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    depth: Vec<usize>,
    /// Near-saddle init scale (balance is lambda^q > 0).
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Step size (the oracle expects eta <= 1e-4).
    #[arg(long, default_value_t = 1e-5)]
    eta: f64,
    /// Step count at the base step size.
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
}

#[derive(Debug, Args)]
struct GeometryArgs {
    /// Steepest-descent dual exponent q (> 0; geometry accepts q outside
    /// [1, 2]).
    #[arg(long)]
    q: f64,
    /// Reparameterization depth L >= 2.
    #[arg(long)]
    depth: usize,
    /// Balance value lambda >= 0 in |.|^q space.
    #[arg(long)]
    lambda: f64,
    /// Evaluation point x.
    #[arg(long)]
    x: f64,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Random instances per gradient suite.
    #[arg(long, default_value_t = 100)]
    instances: u64,
}

fn main() -> ExitCode {
    let argv = match expand_spec_files(std::env::args().collect()) {
        Ok(argv) => argv,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            }
        }
    };
    let outcome = match cli.command {
        Command::RunRegression(args) => commands::run_regression(args),
        Command::RunClassification(args) => commands::run_classification(args),
        Command::SaddleEscape(args) => commands::saddle_escape(args),
        Command::BalanceTable(args) => commands::balance_table(args),
        Command::Equivalence(args) => commands::equivalence(args),
        Command::Geometry(args) => commands::geometry(args),
        Command::Check(args) => commands::check(args),
    };
    match outcome {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::DivergenceOnly) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Expands every `--spec FILE` into the flat `--key value` flags stored in
/// the file, in place.
fn expand_spec_files(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--spec" {
            let path = iter
                .next()
                .ok_or_else(|| "--spec needs a file path".to_string())?;
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("cannot read spec file {path}: {e}"))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    format!("{path}:{}: expected key=value, got `{line}`", lineno + 1)
                })?;
                out.push(format!("--{}", key.trim()));
                out.push(value.trim().to_string());
            }
        } else {
            out.push(arg);
        }
    }
    Ok(out)
}
