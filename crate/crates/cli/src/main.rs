mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rlmeta::policy::ActionKind;
use rlmeta::stats::Metric;

/// Train and evaluate learned parameter-adaptation policies for DE and CMA-ES.
#[derive(Debug, Parser)]
#[command(name = "rlmeta", version)]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the experiment seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for test runs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output root directory.
    #[arg(long, global = true, default_value = "results")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the benchmark registry as `name,dimension` lines.
    ListFunctions,
    /// Train a policy with PPO.
    Train(TrainArgs),
    /// Run the test protocol for a policy or a baseline and write per-run metrics.
    Evaluate(EvaluateArgs),
    /// Build a win-probability matrix of variants against one opponent.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Adaptation {
    Csa,
    Ide,
    Jde,
    Policy,
    Fixed,
}

impl Adaptation {
    pub fn name(self) -> &'static str {
        match self {
            Adaptation::Csa => "csa",
            Adaptation::Ide => "ide",
            Adaptation::Jde => "jde",
            Adaptation::Policy => "policy",
            Adaptation::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training function(s) as `Name:dim`; overrides the config.
    #[arg(long = "function")]
    pub functions: Vec<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, value_parser = parse_action)]
    pub action: Option<ActionKind>,
    #[arg(long)]
    pub retries: Option<usize>,
    /// Poison the weights in the first N attempts (exercises the retry path).
    #[arg(long, hide = true, default_value_t = 0)]
    pub inject_nan_attempts: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum, default_value = "policy")]
    pub adaptation: Adaptation,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Functions as `Name:dim`; defaults to the config's set.
    #[arg(long = "function")]
    pub functions: Vec<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Directory name for this variant's results.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Variant as `name=checkpoint.json`, `name=<baseline>` or a bare baseline name.
    #[arg(long = "variant")]
    pub variants: Vec<String>,
    /// Checkpoint variant, named after the file stem.
    #[arg(long = "checkpoint")]
    pub checkpoints: Vec<PathBuf>,
    /// The opponent every variant is compared against.
    #[arg(long, value_enum, default_value = "jde")]
    pub adaptation: Adaptation,
    /// Opponent checkpoint when `--adaptation policy`.
    #[arg(long)]
    pub opponent_checkpoint: Option<PathBuf>,
    #[arg(long = "function")]
    pub functions: Vec<String>,
    #[arg(long, value_parser = parse_metric, default_value = "auc")]
    pub metric: Metric,
    /// Read per-run metrics written by `evaluate` instead of running;
    /// missing files become `n/a` cells.
    #[arg(long)]
    pub metrics_dir: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
}

fn parse_action(s: &str) -> Result<ActionKind, String> {
    s.parse().map_err(|e: rlmeta::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: rlmeta::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = commands::exit_code(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
