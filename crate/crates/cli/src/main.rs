//! Command-line front end: score subspaces, mine them, and run the synthetic
//! power, β-sensitivity and runtime experiments.

mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uds::harness::{Alternative, DimCase, Generator, Noise, PowerConfig, DEFAULT_BETA_GRID};
use uds::{CsvOptions, UdsParams, DEFAULT_BETA};

#[derive(Debug, Parser)]
#[command(name = "uds", version, about = "Universal dependency scores for subspaces of real-valued data")]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one subspace and print a JSON report.
    Score(ScoreArgs),
    /// Mine the top-ranked subspaces with beam search.
    Search(SearchArgs),
    /// Estimate statistical power against independence.
    Power(PowerArgs),
    /// Repeat the power estimate over a grid of initial bin counts.
    Beta(BetaArgs),
    /// Time scoring over grids of record and dimension counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// The first row holds values, not column names.
    #[arg(long)]
    no_header: bool,
    /// Drop rows with empty or NaN cells instead of failing.
    #[arg(long)]
    drop_na: bool,
}

impl InputArgs {
    fn options(&self) -> Result<CsvOptions, CliError> {
        if !self.delimiter.is_ascii() {
            return Err(CliError::usage("delimiter must be a single ASCII character"));
        }
        Ok(CsvOptions {
            has_header: !self.no_header,
            delimiter: self.delimiter as u8,
            drop_na: self.drop_na,
        })
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated column names (or 1-based indices when there is no header).
    #[arg(long, value_delimiter = ',', required = true)]
    columns: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: usize,
    /// Maximize over all orderings instead of the entropy-sorted one.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = uds::scoring::DEFAULT_EXACT_CAP)]
    max_exact: usize,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 10)]
    beam_width: usize,
    /// Largest subspace size; defaults to min(5, column count).
    #[arg(long)]
    max_dim: Option<usize>,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    #[arg(long)]
    min_score: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
struct ExperimentArgs {
    /// Response function of the dependent data: f1, f2, f3 or f4.
    #[arg(long = "f", default_value = "f1")]
    f: String,
    #[arg(long, default_value_t = 4000)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Noise standard deviation relative to the spread of the latent input.
    #[arg(long, default_value_t = 0.1)]
    sigma_rel: f64,
    /// Extra independent dimensions on the null datasets.
    #[arg(long, default_value_t = 0, conflicts_with_all = ["mixed", "alt_extra"])]
    extra: usize,
    /// Extra independent dimensions on the dependent datasets.
    #[arg(long, conflicts_with = "mixed")]
    alt_extra: Option<usize>,
    /// Draw every dataset's dimensionality uniformly from [2, 50].
    #[arg(long)]
    mixed: bool,
    /// Draw the second arm from independent data too (calibration run).
    #[arg(long)]
    null_vs_null: bool,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out_dir: PathBuf,
}

impl ExperimentArgs {
    fn config(&self, beta: usize) -> Result<PowerConfig, CliError> {
        let f: Generator = self.f.parse().map_err(CliError::from)?;
        let case = if self.mixed {
            DimCase::Mixed { lo: 2, hi: 50 }
        } else if let Some(e) = self.alt_extra {
            DimCase::AltExtra(e)
        } else if self.extra > 0 {
            DimCase::NullExtra(self.extra)
        } else {
            DimCase::Equal
        };
        let config = PowerConfig {
            alternative: if self.null_vs_null {
                Alternative::Null
            } else {
                Alternative::Correlated(f)
            },
            n: self.n,
            m: self.m,
            noise: Noise::Relative(self.sigma_rel),
            case,
            alpha: self.alpha,
            runs: self.runs,
            seed: self.seed,
            params: UdsParams::with_beta(beta),
        };
        config.validate().map_err(CliError::usage_from)?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: usize,
}

#[derive(Debug, Args)]
struct BetaArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Comma-separated β values.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BETA_GRID)]
    grid: Vec<usize>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1000usize, 2000, 4000, 8000])]
    m_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize])]
    n_grid: Vec<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Failure with its process exit code: 2 for usage, 3 for data.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn usage_from(err: uds::Error) -> Self {
        Self::usage(err.to_string())
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError {
            code: 3,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<uds::Error> for CliError {
    fn from(err: uds::Error) -> Self {
        CliError {
            code: if err.is_data_error() { 3 } else { 2 },
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Score(args) => report::score(args),
        Command::Search(args) => report::search(args),
        Command::Power(args) => report::power(args),
        Command::Beta(args) => report::beta(args),
        Command::Bench(args) => report::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
