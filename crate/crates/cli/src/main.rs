//! `spdectl`: train, simulate and verify feedback controls for stochastic
//! reaction-diffusion equations.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{key_help, split_assignment, Config, ConfigError};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<spdectl::Error> for CliError {
    fn from(e: spdectl::Error) -> Self {
        use spdectl::Error as E;
        match e {
            E::Diverged { .. } | E::AllSamplesDiverged { .. } | E::NonFiniteParameters { .. } => {
                CliError::Numerical(e.to_string())
            }
            E::Io(_) | E::Format(_) => CliError::Io(e.to_string()),
            E::InvalidArgument(m) => CliError::Config(ConfigError { key: "-".into(), message: m }),
            E::Internal(m) => CliError::Numerical(m),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "spdectl", version, about, after_long_help = key_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Master seed (overrides the `seed` key).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "SPDECTL_OUT", default_value = "runs", global = true, hide_env_values = true)]
    out_root: PathBuf,
    /// Maximum number of samples simulated in parallel.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Train the configured feedback with stochastic gradient descent.
    Train,
    /// Simulate paths under a saved or named feedback.
    Simulate,
    /// Riccati gains and optimal cost of the linear-quadratic heat problem.
    Riccati,
    /// Compare adjoint gradients with forward sensitivities and finite differences.
    GradCheck,
    /// Estimate the cost of saved parameters on fresh evaluation seeds.
    Evaluate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Simulate => "simulate",
            Command::Riccati => "riccati",
            Command::GradCheck => "grad-check",
            Command::Evaluate => "evaluate",
        }
    }
}

fn load_config(common: &Common) -> Result<Config, CliError> {
    let Some(path) = &common.config else {
        return Err(ConfigError { key: "--config".into(), message: "no configuration file given".into() }.into());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut overrides = Vec::new();
    for s in &common.set {
        match split_assignment(s) {
            Some(kv) => overrides.push(kv),
            None => return Err(ConfigError { key: s.clone(), message: "--set expects KEY=VALUE".into() }.into()),
        }
    }
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    Ok(Config::parse(&text, &overrides)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.common)?;
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    let out = match &cli.common.out {
        Some(p) => p.clone(),
        None => cli.common.out_root.join(format!("{}-{}-seed{}", cli.command.name(), cfg.get("problem"), cfg.seed()?)),
    };
    let dir = commands::run(cli.command, &cfg, out, cli.common.quiet)?;
    if !cli.common.quiet {
        println!("artifacts written to {}", dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spdectl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
