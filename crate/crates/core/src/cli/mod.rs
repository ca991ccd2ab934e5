//! The `indii` command line.
//!
//! Every subcommand accepts `--config file.toml`; values are read from the
//! section named after the subcommand (top-level keys act as defaults) and
//! flags override them. The resolved values are written next to the output
//! (`<out>.config.toml`, or `config.toml` inside an output directory), or to
//! stderr when output goes to stdout.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

mod commands;
pub mod config;
pub mod io;

use crate::error::IndiiError;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

pub use io::SCHEMA_VERSION;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(IndiiError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl From<IndiiError> for CliError {
    fn from(e: IndiiError) -> Self {
        match e {
            IndiiError::Config(m) | IndiiError::Io(m) => CliError::Usage(m),
            IndiiError::InvalidParameter(m) => CliError::Usage(format!("invalid parameter: {m}")),
            IndiiError::Dimension(m) => CliError::Usage(format!("dimension mismatch: {m}")),
            e => CliError::Numerical(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "indii", version, about = "Indirect inference with constrained auxiliary models")]
pub struct Cli {
    /// TOML config; keys under [<subcommand>] mirror the long flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate SV or dynamic-probit data from frozen innovations.
    Simulate(SimulateArgs),
    /// Constrained auxiliary fit with Kuhn-Tucker multipliers.
    FitAux(AuxArgs),
    /// Constrained fit followed by the one-step FUNC estimator.
    Func(AuxArgs),
    /// Score test of the auxiliary equality constraints.
    ScoreTest(AuxArgs),
    /// Indirect-inference estimate of the structural parameters.
    Estimate(EstimateArgs),
    /// Asymptotic and Monte Carlo variances for competing selection matrices.
    Overid(OveridArgs),
    /// Monte Carlo study of a preset design.
    Montecarlo(MonteCarloArgs),
    /// Gaussian kernel density of one CSV column.
    Density(DensityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::FitAux(_) => "fit-aux",
            Command::Func(_) => "func",
            Command::ScoreTest(_) => "score-test",
            Command::Estimate(_) => "estimate",
            Command::Overid(_) => "overid",
            Command::Montecarlo(_) => "montecarlo",
            Command::Density(_) => "density",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// sv | probit
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated parameter vector: alpha,delta,sigma_v or theta1...,theta2.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Number of simulated paths, one CSV column each.
    #[arg(long = "H")]
    pub h: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuxArgs {
    /// garch | garch-t | probit0
    #[arg(long)]
    pub criterion: Option<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column holding the series or outcome (default: first).
    #[arg(long)]
    pub column: Option<String>,
    /// Linear constraint spec (TOML) replacing the GARCH defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// c in the GARCH bound phi >= c T^-kappa.
    #[arg(long)]
    pub phi_c: Option<f64>,
    #[arg(long)]
    pub phi_kappa: Option<f64>,
    /// Output JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub aux: AuxArgs,
    /// score-ours | score-cfs | wald-cfs | wald-c | wald-func-demo
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long = "H")]
    pub h: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weighting matrix as CSV with a header row.
    #[arg(long = "W")]
    pub w: Option<PathBuf>,
    /// Skip the sandwich variance.
    #[arg(long)]
    pub no_variance: bool,
}

#[derive(Debug, Args)]
pub struct OveridArgs {
    /// linear | nonlinear | gmm | toy
    #[arg(long)]
    pub instance: Option<String>,
    /// Comma-separated subset of naive,optimal.
    #[arg(long)]
    pub compare: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    /// jpr1 | jpr2 | probit-null | probit-alt | overid
    #[arg(long)]
    pub design: Option<String>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "H")]
    pub h: Option<usize>,
    /// Comma-separated I-I variants.
    #[arg(long)]
    pub variants: Option<String>,
    #[arg(long)]
    pub phi_c: Option<f64>,
    #[arg(long)]
    pub phi_kappa: Option<f64>,
    /// Overrides the design's true parameter vector.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Record auxiliary fits only.
    #[arg(long)]
    pub no_ii: bool,
    /// Moment system for the overid design.
    #[arg(long)]
    pub instance: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column to smooth (default: first).
    #[arg(long)]
    pub column: Option<String>,
    /// Kernel bandwidth (default: Silverman).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Fraction of the lower tail dropped before smoothing (default .015).
    #[arg(long)]
    pub trim: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `argv` (program name first), run the subcommand, return the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("indii: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Some(p) = &cli.config {
        if !p.is_file() {
            return Err(CliError::usage(format!("config file {} does not exist", p.display())));
        }
    }
    let settings = config::Settings::load(cli.command.name(), cli.config.as_deref())?;
    commands::run(cli.command, settings)
}
