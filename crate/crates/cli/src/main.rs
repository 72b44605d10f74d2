//! `orderstat`: batch front end for the simulator / GP-surrogate order
//! statistic pipeline.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orderstat_gp::surrogate::{SamplingMode, ThetaRefresh};
use orderstat_gp::{DistFamily, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "orderstat", version, about = "Estimate order statistics of peak structural responses by brute force through a simulator or a GP surrogate")]
pub struct Cli {
    /// Worker threads for parallel stages (defaults to all cores).
    #[arg(long, global = true, env = "ORDERSTAT_THREADS")]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory; must be new or empty unless --force is given.
    #[arg(long)]
    pub out: PathBuf,

    /// Overwrite files in an existing, non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or ingest an hourly weather sequence.
    #[command(subcommand)]
    Weather(WeatherCommand),

    /// Build the surrogate training table from simulator runs.
    Trainset {
        /// Number of design points.
        #[arg(long)]
        n: usize,
        /// Simulator runs per design point.
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        /// Simulator configuration (TOML); defaults are used when omitted.
        #[arg(long)]
        sim_config: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },

    /// Train a GP surrogate for one distribution family.
    Train {
        /// Training table CSV.
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_parser = parse_family)]
        family: DistFamily,
        #[arg(long)]
        seed: u64,
        /// Hyperparameter search starts per target.
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        /// Subsample the training rows beyond this count.
        #[arg(long, default_value_t = 2000)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = Mode::PosteriorSample)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Refresh::PerHour)]
        refresh: Refresh,
        #[command(flatten)]
        out: OutArgs,
    },

    /// Score a trained surrogate on the test split of a training table.
    Eval {
        #[arg(long)]
        table: PathBuf,
        /// Surrogate bundle directory.
        #[arg(long)]
        model: PathBuf,
        /// Add each row's observation noise to the predictive interval.
        #[arg(long)]
        include_noise: bool,
        #[command(flatten)]
        out: OutArgs,
    },

    /// Estimate the distribution of Y_k by brute force.
    Qoi {
        #[arg(long, value_enum)]
        source: Source,
        /// Surrogate bundle directory (required for --source surrogate).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Weather CSV; synthesized from --seed when omitted.
        #[arg(long)]
        weather: Option<PathBuf>,
        /// Number of hours: truncates --weather, or sets the synthetic length.
        #[arg(long)]
        hours: Option<usize>,
        #[arg(long, default_value_t = 100)]
        k: usize,
        /// Number of realizations.
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        sim_config: Option<PathBuf>,
        /// Override the bundle's sampling mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Override the bundle's parameter refresh policy.
        #[arg(long, value_enum)]
        refresh: Option<Refresh>,
        #[command(flatten)]
        out: OutArgs,
    },

    /// Compare two QoI result directories (candidate A against reference B).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum WeatherCommand {
    /// Synthesize a correlated hourly sequence.
    Synth {
        #[arg(long)]
        hours: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Validate an existing weather CSV and copy it into the output directory.
    Load {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Simulator,
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Point,
    PosteriorSample,
}

impl From<Mode> for SamplingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Point => SamplingMode::Point,
            Mode::PosteriorSample => SamplingMode::PosteriorSample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Refresh {
    PerHour,
    PerRealization,
}

impl From<Refresh> for ThetaRefresh {
    fn from(r: Refresh) -> Self {
        match r {
            Refresh::PerHour => ThetaRefresh::PerHour,
            Refresh::PerRealization => ThetaRefresh::PerRealization,
        }
    }
}

fn parse_family(s: &str) -> Result<DistFamily, String> {
    s.parse().map_err(|e: orderstat_gp::Error| e.to_string())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure thread pool: {e}");
        }
    }

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let orderstat_gp::Error::Numeric { trace, .. } = &e {
                if !trace.is_empty() {
                    eprintln!("iteration trace: {trace:?}");
                }
            }
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
