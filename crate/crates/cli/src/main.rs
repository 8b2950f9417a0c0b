//! `bcvar`: train CVaR-boosted ensembles, sweep alpha, evaluate, and run the
//! built-in oracle checks.

mod check;
mod commands;
mod data_args;
mod fmt;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use boosted_cvar::Error;
use data_args::DataArgs;

#[derive(Parser, Debug)]
#[command(name = "bcvar", version, about = "Boosted CVaR classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an ensemble and write it to --out.
    Train(TrainArgs),
    /// Emit alpha,method,cvar,avg_loss rows for saved ensembles.
    Curve(CurveArgs),
    /// Evaluate a saved ensemble on held-out data.
    Eval(EvalArgs),
    /// Run the oracle and invariant checks.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// erm, adaavg, adalp or reglp.
    #[arg(long, default_value = "adalp")]
    pub algo: String,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Step size of the exponential weights (default sqrt(8 ln n / T)).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Entropy coefficient for reglp; unset solves the plain LP dual.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Target accuracy for reglp; sets beta and the round count.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Solve the mixture on the training set.
    #[arg(long)]
    pub lambda_on_train: bool,
    /// stump or tree.
    #[arg(long, default_value = "stump")]
    pub learner: String,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub warmup_rounds: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    /// Saved ensemble; repeat for several.
    #[arg(long = "model", required = true)]
    pub models: Vec<std::path::PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    pub alpha_grid: Vec<f64>,
    /// Methods derived from each ensemble's base models (erm, adaavg,
    /// adalp, reglp); defaults to the algorithm that trained it.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Data to evaluate on; defaults to the validation split recorded in
    /// the ensemble file.
    #[command(flatten)]
    pub data: DataArgs,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long = "model")]
    pub model: std::path::PathBuf,
    /// Alpha values; defaults to the training alpha.
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Vec<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Also estimate the risks by sampling one base model per prediction.
    #[arg(long)]
    pub mc_draws: Option<usize>,
    /// Evaluate on the whole file or synthetic set, without splitting.
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Run a single block, e.g. strong-duality.
    #[arg(long)]
    pub only: Option<String>,
    /// List the blocks and exit.
    #[arg(long)]
    pub list: bool,
    /// Negative control: corrupts every computed value.
    #[arg(long, hide = true)]
    pub perturb: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    Flag(String),
    Lib(Error),
    ChecksFailed(usize),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Flag(_) => 2,
            CliError::Lib(e) if e.is_data() => 3,
            CliError::Lib(e) if e.is_solver() => 4,
            CliError::Lib(_) => 1,
            CliError::ChecksFailed(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Flag(m) => write!(f, "invalid flags: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::ChecksFailed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Curve(a) => commands::curve(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Check(a) => check::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
