//! `covreg` command line: fit and tune sparse covariance regressions, run the
//! Monte Carlo harness, and backtest minimum-variance portfolios.

mod basis;
mod commands;
mod config;
mod data;
mod estimators;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// CLI failure with its exit class: data problems exit 1, numerical failures
/// exit 2.
#[derive(Debug)]
pub enum CliError {
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(message.into())
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError::Numeric(message.into())
    }

    pub fn with_context(self, context: impl fmt::Display) -> Self {
        match self {
            CliError::Data(m) => CliError::Data(format!("{context}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{context}: {m}")),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(m) | CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<covreg::Error> for CliError {
    fn from(e: covreg::Error) -> Self {
        use covreg::Error as E;
        let numeric = matches!(
            e,
            E::NearSingularGram { .. }
                | E::DegenerateCoordinate { .. }
                | E::InvalidWeight { .. }
                | E::AllFitsFailed(_)
                | E::NotPositiveDefinite { .. }
                | E::RankDeficient(_)
                | E::WindowFailed { .. }
                | E::PdRetriesExhausted(_)
        );
        if numeric {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "covreg",
    version,
    about = "Sparse covariance regression with folded concave penalties",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the covariance regression at a fixed penalty level
    Fit(commands::FitArgs),
    /// Select the penalty level by BIC over a lambda path
    Tune(commands::TuneArgs),
    /// Monte Carlo replication harness on the synthetic generator
    Simulate(commands::SimulateArgs),
    /// Rolling-window minimum-variance portfolio backtest
    Backtest(commands::BacktestArgs),
    /// Minimum-variance portfolio weights from one covariance fit
    Portfolio(commands::PortfolioArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct SharedArgs {
    /// TOML configuration file supplying defaults (flags win)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Base random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output artifact path (stdout when omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Penalty family: lasso, scad, or mcp
    #[arg(long, value_name = "FAMILY")]
    pub penalty: Option<String>,
    /// Concavity parameter (SCAD default 3.7, MCP default 1.5)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Penalty level
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Worker threads for replications (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Similarity-basis input flags shared by the data-driven subcommands.
#[derive(Args, Debug, Clone)]
pub struct BasisArgs {
    /// Covariate CSV (rows = subjects, named columns)
    #[arg(long, value_name = "FILE")]
    pub covariates: Option<PathBuf>,
    /// Covariate constructions: comma list of kernel, outer
    #[arg(long, value_name = "LIST")]
    pub constructions: Option<String>,
    /// Gaussian kernel bandwidth
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Fraction of pairs kept by the kernel threshold, in (0, 1]
    #[arg(long = "kernel-density")]
    pub kernel_density: Option<f64>,
    /// Label CSV (subject,label) for the indicator similarity
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Edge list file (i j per line) for the network similarity
    #[arg(long, value_name = "FILE")]
    pub edges: Option<PathBuf>,
    /// Extra similarity matrix in triplet format (repeatable)
    #[arg(long = "matrix", value_name = "FILE")]
    pub matrices: Vec<PathBuf>,
    /// Skip the l1 rescaling of the similarity matrices
    #[arg(long = "no-rescale", default_value_t = false)]
    pub no_rescale: bool,
}

/// Lambda-path flags.
#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Number of grid points
    #[arg(long = "n-lambda")]
    pub n_lambda: Option<usize>,
    /// Grid floor as a fraction of lambda_max
    #[arg(long = "lambda-min-ratio")]
    pub lambda_min_ratio: Option<f64>,
    /// Explicit comma-separated lambda grid (overrides the generated one)
    #[arg(long = "lambda-grid", value_name = "LIST")]
    pub lambda_grid: Option<String>,
}

fn install_thread_pool(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::data(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version on stdout with success; everything
            // else is a usage problem
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Tune(args) => commands::tune(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Backtest(args) => commands::backtest(args),
        Command::Portfolio(args) => commands::portfolio(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
