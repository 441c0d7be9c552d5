//! Command-line harness around the fofr library: reproducible, file-driven
//! simulation studies, penalty calibration, fitting, prediction and
//! cross-validation, emitting CSV/JSON for external plotting.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime failure.

mod commands;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "fofr",
    about = "Adaptive function-on-function linear regression",
    version
)]
pub(crate) struct Cli {
    /// Base seed for all random streams.
    #[arg(long, global = true, default_value_t = 1)]
    pub(crate) seed: u64,

    /// Worker threads for replicates and folds (0 = all cores). Results do
    /// not depend on this value.
    #[arg(long, global = true, env = "FOFR_THREADS", default_value_t = 0)]
    pub(crate) threads: usize,

    /// Directory receiving all output files.
    #[arg(long, global = true, env = "FOFR_OUT_DIR", default_value = ".")]
    pub(crate) out_dir: PathBuf,

    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    pub(crate) quiet: bool,

    #[command(subcommand)]
    pub(crate) command: Command,
}

#[derive(Subcommand)]
pub(crate) enum Command {
    /// Replicated prediction-error study for a simulation model.
    Simulate(SimulateArgs),
    /// Sweep the penalty constant kappa over a grid with common random numbers.
    Calibrate(CalibrateArgs),
    /// Fit the adaptively selected estimator to day-split series data.
    Fit(FitArgs),
    /// Predict responses for covariate curves with a saved model.
    Predict(PredictArgs),
    /// Leave-one-out cross-validation on day-split series data.
    Cv(CvArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum ModelArg {
    I,
    Ii,
    Iii,
}

impl ModelArg {
    fn label(self) -> &'static str {
        match self {
            ModelArg::I => "i",
            ModelArg::Ii => "ii",
            ModelArg::Iii => "iii",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum LogArg {
    None,
    Log,
    Log1p,
}

impl From<LogArg> for fofr::dataio::LogMode {
    fn from(value: LogArg) -> Self {
        match value {
            LogArg::None => fofr::dataio::LogMode::None,
            LogArg::Log => fofr::dataio::LogMode::Log,
            LogArg::Log1p => fofr::dataio::LogMode::Log1p,
        }
    }
}

#[derive(Args)]
pub(crate) struct SimulateArgs {
    /// Simulation model.
    #[arg(long, value_enum)]
    pub(crate) model: ModelArg,

    /// Training sample size.
    #[arg(long, default_value_t = 600)]
    pub(crate) n: usize,

    /// Number of Monte Carlo replicates.
    #[arg(long, default_value_t = 100)]
    pub(crate) reps: usize,

    /// Penalty constant.
    #[arg(long, default_value_t = 0.6)]
    pub(crate) kappa: f64,

    /// Noise variance for the penalty: "known" (the model's exact value),
    /// `known:<value>`, or "plugin".
    #[arg(long, default_value = "known")]
    pub(crate) sigma: String,

    /// Grid size.
    #[arg(long, default_value_t = 100)]
    pub(crate) p: usize,

    /// Optional cap on the candidate dimensions.
    #[arg(long)]
    pub(crate) cap: Option<usize>,

    /// Run the sample-size study over these sizes instead of a single n.
    /// A bare --n-list uses the reference protocol 200,400,600.
    #[arg(long, value_delimiter = ',', num_args = 0..=1, default_missing_value = "200,400,600")]
    pub(crate) n_list: Option<Vec<usize>>,
}

#[derive(Args)]
pub(crate) struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub(crate) model: ModelArg,

    #[arg(long, default_value_t = 600)]
    pub(crate) n: usize,

    #[arg(long, default_value_t = 100)]
    pub(crate) reps: usize,

    #[arg(long, default_value_t = 0.2)]
    pub(crate) kappa_min: f64,

    #[arg(long, default_value_t = 2.0)]
    pub(crate) kappa_max: f64,

    #[arg(long, default_value_t = 0.2)]
    pub(crate) kappa_step: f64,

    #[arg(long, default_value = "known")]
    pub(crate) sigma: String,

    #[arg(long, default_value_t = 100)]
    pub(crate) p: usize,

    #[arg(long)]
    pub(crate) cap: Option<usize>,
}

/// Input-data flags shared by fit and cv. Either a single series (lagged
/// day-pairs mode) or two paired series.
#[derive(Args)]
pub(crate) struct DataArgs {
    /// CSV file with one series; day i-1 becomes the covariate for day i.
    #[arg(long)]
    pub(crate) data: Option<PathBuf>,

    /// Column of --data (header name or 0-based index).
    #[arg(long)]
    pub(crate) column: Option<String>,

    /// Log transform for the single-series mode.
    #[arg(long, value_enum, default_value = "none")]
    pub(crate) log: LogArg,

    /// Covariate CSV file (paired mode).
    #[arg(long)]
    pub(crate) x_data: Option<PathBuf>,

    #[arg(long)]
    pub(crate) x_column: Option<String>,

    #[arg(long, value_enum, default_value = "none")]
    pub(crate) log_x: LogArg,

    /// Response CSV file (paired mode).
    #[arg(long)]
    pub(crate) y_data: Option<PathBuf>,

    #[arg(long)]
    pub(crate) y_column: Option<String>,

    #[arg(long, value_enum, default_value = "none")]
    pub(crate) log_y: LogArg,

    /// Readings per day.
    #[arg(long)]
    pub(crate) points_per_day: usize,

    /// CSV field delimiter.
    #[arg(long, default_value_t = ',')]
    pub(crate) delimiter: char,

    /// Drop days whose (response) maximum exceeds the Tukey fence.
    #[arg(long)]
    pub(crate) filter_outliers: bool,
}

#[derive(Args)]
pub(crate) struct FitArgs {
    #[command(flatten)]
    pub(crate) data: DataArgs,

    #[arg(long, default_value_t = 0.6)]
    pub(crate) kappa: f64,

    /// "plugin" (default) or `known:<value>`.
    #[arg(long, default_value = "plugin")]
    pub(crate) sigma: String,

    #[arg(long)]
    pub(crate) cap: Option<usize>,
}

#[derive(Args)]
pub(crate) struct PredictArgs {
    /// Saved model JSON.
    #[arg(long)]
    pub(crate) model_file: PathBuf,

    /// Covariate curves CSV (optional index column, one column per node).
    #[arg(long)]
    pub(crate) covariates: PathBuf,

    /// Log transform applied to the covariates before prediction.
    #[arg(long, value_enum, default_value = "none")]
    pub(crate) log: LogArg,
}

#[derive(Args)]
pub(crate) struct CvArgs {
    #[command(flatten)]
    pub(crate) data: DataArgs,

    #[arg(long, default_value_t = 0.6)]
    pub(crate) kappa: f64,

    #[arg(long, default_value = "plugin")]
    pub(crate) sigma: String,

    #[arg(long)]
    pub(crate) cap: Option<usize>,

    /// Center folds with the full-sample mean instead of per-fold means.
    #[arg(long)]
    pub(crate) global_centering: bool,
}

/// Failure channel separating flag misuse (exit 2) from runtime errors (exit 1).
pub(crate) enum CmdError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CmdError {
    fn from(value: anyhow::Error) -> Self {
        CmdError::Runtime(value)
    }
}

impl From<fofr::Error> for CmdError {
    fn from(value: fofr::Error) -> Self {
        CmdError::Runtime(value.into())
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot configure {} threads: {e}", cli.threads);
            return 1;
        }
    }

    if let Err(e) = std::fs::create_dir_all(&cli.out_dir) {
        eprintln!("error: cannot create {}: {e}", cli.out_dir.display());
        return 1;
    }

    let outcome = match &cli.command {
        Command::Simulate(args) => commands::simulate(&cli, args),
        Command::Calibrate(args) => commands::calibrate(&cli, args),
        Command::Fit(args) => commands::fit(&cli, args),
        Command::Predict(args) => commands::predict(&cli, args),
        Command::Cv(args) => commands::cv(&cli, args),
    };

    match outcome {
        Ok(()) => 0,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CmdError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
