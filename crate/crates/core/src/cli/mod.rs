//! Command-line front end: argument definitions, run directories and the
//! train, eval and analyze pipelines.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags, unknown config
//! keys, missing inputs, refusing to overwrite outputs, checkpoint and
//! scenario dimensions that disagree) and 3 for failures while running.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_analyze, cmd_eval, cmd_list_scenarios, cmd_train, read_series};
pub use config::{RunConfig, DEFAULT_SEED};
pub use manifest::{RunDir, RunManifest, RunStatus, MANIFEST_FILE, MANIFEST_SCHEMA};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gridattack", version, about = "Train and analyze measurement-falsification attacks on a two-area power grid")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an attack policy on a scenario.
    Train(TrainArgs),
    /// Roll out a trained policy deterministically and record trajectories.
    Eval(EvalArgs),
    /// Eigenmodes of the grid, spectrum of a recorded signal, or trajectory metrics.
    Analyze(AnalyzeArgs),
    /// Print the bundled scenarios.
    ListScenarios,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = "runs/out")]
    pub out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Bundled scenario name or path to a scenario TOML file.
    #[arg(long)]
    pub scenario: String,
    /// TOML file with PPO settings and an optional [scenario] table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting, e.g. total_timesteps=50000 or scenario.gamma_trip=2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seed for every random choice of the run [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parallel environment workers.
    #[arg(long)]
    pub num_envs: Option<usize>,
    /// Suppress progress lines.
    #[arg(long)]
    pub quiet: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Scenario to evaluate on [default: the checkpoint's own].
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of evaluation episodes.
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
    /// Base seed of the episode resets [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeMode {
    /// Eigenvalues of the linearized grid (input: case TOML, default bundled case).
    Eigen,
    /// Spectrum of one column of a CSV series (input: trajectory or time-series CSV).
    Fft,
    /// Peak excursions and relay times of a trajectory CSV.
    Metrics,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub mode: AnalyzeMode,
    /// Input file for the chosen mode.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Column to transform in fft mode [default: first injection column,
    /// otherwise the second column].
    #[arg(long)]
    pub channel: Option<String>,
    /// Scenario whose relay settings apply in metrics mode [default: standard settings].
    #[arg(long)]
    pub scenario: Option<String>,
    /// Finite-difference perturbation for eigen mode, pu.
    #[arg(long, default_value_t = crate::analysis::DEFAULT_PERTURBATION)]
    pub perturbation: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Run a parsed command; returns the manifest for commands that write one.
pub fn run(cli: Cli) -> Result<Option<RunManifest>, CliError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match cli.command {
        Command::Train(a) => cmd_train(&a, args).map(Some),
        Command::Eval(a) => cmd_eval(&a, args).map(Some),
        Command::Analyze(a) => cmd_analyze(&a, args).map(Some),
        Command::ListScenarios => {
            print!("{}", cmd_list_scenarios());
            Ok(None)
        }
    }
}
