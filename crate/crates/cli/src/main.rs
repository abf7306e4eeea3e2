//! `kstar`: user-selection analysis and simulation for a ZF massive MIMO cell.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfigFile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("acceptance check failed: {0}")]
    Assert(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<kstar_core::Error> for CliError {
    fn from(e: kstar_core::Error) -> Self {
        use kstar_core::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidArgument(_) => CliError::Config(e.to_string()),
            E::IllConditioned { .. } | E::NoConvergence { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Assert(_) => 4,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kstar", version, about = "Optimal user-count selection for ZF massive MIMO downlink")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration; omitted keys take the reference values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials, overriding `run.trials` (draws for `validate`).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, env = "KSTAR_THREADS")]
    threads: Option<usize>,
    /// CSV destination; the JSON summary goes beside it with a .json
    /// extension. Without it the CSV goes to stdout and the summary to stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deterministic sum-rate curves and the optimal user count for RUS and LUS.
    Kstar,
    /// Deterministic equivalents and rate approximations for every K.
    Approx,
    /// Monte Carlo ergodic sum rate of each scheme.
    Simulate {
        /// Comma-separated schemes (kstar-rus, kstar-lus, rus, sus, k-rus:K, k-lus:K).
        #[arg(long, value_delimiter = ',')]
        scheme: Vec<String>,
    },
    /// Simulated sum rate of each scheme along one parameter axis.
    Sweep {
        /// power_dbm, candidates_n, active_k, rho or delta.
        #[arg(long)]
        axis: Option<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        scheme: Vec<String>,
    },
    /// Jain fairness of the selection schemes over fixed-geometry windows.
    Fairness {
        #[arg(long, value_delimiter = ',')]
        scheme: Vec<String>,
        #[arg(long)]
        windows: Option<usize>,
        #[arg(long)]
        slots: Option<usize>,
    },
    /// Monte Carlo check of the large-system limits for growing M.
    Validate {
        /// Exit with status 4 unless the errors shrink with M and end below the bound.
        #[arg(long)]
        assert: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut file = match &cli.common.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    if let Some(seed) = cli.common.seed {
        file.run.seed = seed;
    }
    let mut validate_draws = None;
    if let Some(trials) = cli.common.trials {
        if trials == 0 {
            return Err(CliError::Config("--trials must be positive".into()));
        }
        file.run.trials = trials;
        validate_draws = Some(trials);
    }
    let threads = match cli.common.threads {
        Some(0) => return Err(CliError::Config("--threads must be positive".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };

    let table = {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
        pool.install(|| match &cli.command {
            Command::Kstar => commands::kstar(&file),
            Command::Approx => commands::approx(&file),
            Command::Simulate { scheme } => commands::simulate(&mut file, scheme),
            Command::Sweep { axis, values, scheme } => commands::sweep(&mut file, axis.as_deref(), values, scheme),
            Command::Fairness { scheme, windows, slots } => commands::fairness(&mut file, scheme, *windows, *slots),
            Command::Validate { assert } => commands::validate(&mut file, validate_draws, *assert),
        })
    };
    let (table, verdict) = table?;
    table.emit(cli.common.out.as_deref(), &file.fingerprint(), file.run.seed)?;
    verdict
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kstar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
