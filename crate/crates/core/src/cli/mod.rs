//! Command-line front end.
//!
//! ```text
//! desens-ckf run <scenario|config.json> [--mc-runs N] [--seed S] [--dt DT]
//!                [--weights-scale F] [--set key=value]... [--format csv|json]
//!                [--output-dir DIR] [--jobs N]
//! desens-ckf list-scenarios
//! desens-ckf validate-config <config.json>
//! desens-ckf version
//! ```
//!
//! Exit status is 0 on success, 1 for configuration or usage errors and 2
//! when the experiment itself fails (every run diverged, or the output could
//! not be written). Without `--seed` the seed is taken from
//! `DESENS_CKF_SEED`, then from the config.

mod output;

pub use output::{
    defaults_in_force, filter_tables, format_number, metadata, write_artifacts, Format, SeedSource, Table,
};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use crate::harness::builtin_scenarios;
use crate::harness::{run_scenario_with_jobs, ConfigError, HarnessError, ScenarioConfig};

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "DESENS_CKF_SEED";

#[derive(Debug, Parser)]
#[command(name = "desens-ckf", about = "Desensitized cubature Kalman filter benchmarks", disable_version_flag = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo experiment and write its artifacts.
    Run(RunArgs),
    /// Print the names of the built-in scenarios.
    ListScenarios,
    /// Check a scenario file without running it.
    ValidateConfig { path: PathBuf },
    /// Print the tool version.
    Version,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Built-in scenario name or path to a JSON scenario file.
    pub scenario: String,
    #[arg(long)]
    pub mc_runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Multiplies every sensitivity weight matrix.
    #[arg(long)]
    pub weights_scale: Option<f64>,
    /// Override any top-level config key; the value is parsed as JSON.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
    /// Worker thread cap; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Harness(HarnessError),
    #[error("could not write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Harness(HarnessError::Config(_)) => 1,
            CliError::Harness(_) | CliError::Io(_) => 2,
        }
    }
}

/// Parses a scenario document, reporting the offending key where serde
/// names one.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let key = ["unknown field `", "missing field `"]
            .iter()
            .find_map(|p| msg.split_once(p).and_then(|(_, rest)| rest.split_once('`')).map(|(k, _)| k.to_string()))
            .unwrap_or_else(|| "<document>".into());
        ConfigError::new(key, msg)
    })
}

/// Resolves a built-in name or reads a scenario file.
pub fn load_scenario(name_or_path: &str) -> Result<ScenarioConfig, ConfigError> {
    if let Some((_, cfg)) = builtin_scenarios().into_iter().find(|(n, _)| *n == name_or_path) {
        return Ok(cfg);
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|e| {
        ConfigError::new("scenario", format!("`{name_or_path}` is not a built-in scenario or readable file: {e}"))
    })?;
    parse_config(&text)
}

/// Sets one top-level key from its textual form. Values that are not valid
/// JSON are taken as strings, so `--set model=helicopter` works unquoted.
pub fn set_key(config: &ScenarioConfig, key: &str, raw: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut doc = serde_json::to_value(config).map_err(|e| ConfigError::new(key, e.to_string()))?;
    let slot = doc
        .as_object_mut()
        .and_then(|o| o.get_mut(key))
        .ok_or_else(|| ConfigError::new(key, "no such configuration key"))?;
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    serde_json::from_value(doc).map_err(|e| ConfigError::new(key, e.to_string()))
}

/// Applies `--set` pairs, then the dedicated flags, then the seed fallback.
pub fn apply_overrides(
    mut config: ScenarioConfig,
    args: &RunArgs,
    env_seed: Option<&str>,
) -> Result<(ScenarioConfig, SeedSource), ConfigError> {
    for pair in &args.set {
        let (key, value) =
            pair.split_once('=').ok_or_else(|| ConfigError::new(pair.as_str(), "expected KEY=VALUE"))?;
        config = set_key(&config, key.trim(), value.trim())?;
    }
    if let Some(runs) = args.mc_runs {
        config.mc_runs = runs;
    }
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(scale) = args.weights_scale {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(ConfigError::new("weights_scale", format!("must be finite and non-negative, got {scale}")));
        }
        config.weights.iter_mut().flatten().flatten().for_each(|w| *w *= scale);
    }
    let source = if let Some(seed) = args.seed {
        config.seed = seed;
        SeedSource::Flag
    } else if let Some(raw) = env_seed {
        config.seed = raw
            .trim()
            .parse()
            .map_err(|_| ConfigError::new(SEED_ENV, format!("`{raw}` is not an unsigned integer")))?;
        SeedSource::Environment
    } else {
        SeedSource::Config
    };
    config.validate()?;
    Ok((config, source))
}

/// Executes `run` and returns the written paths.
pub fn run(args: &RunArgs, env_seed: Option<&str>) -> Result<Vec<PathBuf>, CliError> {
    let (config, source) = apply_overrides(load_scenario(&args.scenario)?, args, env_seed)?;
    if args.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let artifacts = run_scenario_with_jobs(&config, args.jobs).map_err(CliError::Harness)?;
    for f in &artifacts.filters {
        if !f.divergences.is_empty() {
            eprintln!("warning: {} diverged in {} of {} runs", f.kind, f.divergences.len(), config.mc_runs);
        }
    }
    Ok(write_artifacts(&artifacts, &args.output_dir, args.format, source)?)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let env_seed = std::env::var(SEED_ENV).ok();
            let written = run(&args, env_seed.as_deref())?;
            println!("wrote {} files to {}", written.len(), args.output_dir.display());
        }
        Command::ListScenarios => {
            for (name, _) in builtin_scenarios() {
                println!("{name}");
            }
        }
        Command::ValidateConfig { path } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ConfigError::new("path", format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?.validate()?;
            println!("{}: ok", path.display());
        }
        Command::Version => println!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
