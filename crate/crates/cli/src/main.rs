use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use thiserror::Error;

use rfiqkd_core::scenario::{
    emit_results, presets, OutputError, OutputFormat, Scenario, ScenarioError,
};
use rfiqkd_core::{ConfigError, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "rfiqkd",
    version,
    about = "Reference-frame-independent QKD scenario simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the per-window time series.
    Run {
        /// Scenario file, or `preset:drift` / `preset:burst`.
        #[arg(long)]
        scenario: String,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario pulse_scale.
        #[arg(long)]
        pulse_scale: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads; defaults to the number of CPUs. Output does not
        /// depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the built-in scenarios.
    Presets {
        /// Print the named preset as a scenario file.
        #[arg(long)]
        show: Option<String>,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Output(#[from] OutputError),

    #[error("{0}")]
    Internal(String),
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(c) => CliError::Config(c),
            ScenarioError::Invariant(msg) => CliError::Internal(msg),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Read { .. } | CliError::Output(OutputError::Io { .. }) => 3,
            CliError::Output(_) | CliError::Internal(_) => 4,
        }
    }
}

fn load_scenario(spec: &str) -> Result<ScenarioConfig, CliError> {
    if let Some(name) = spec.strip_prefix("preset:") {
        return Ok(presets::preset(name)?);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ScenarioConfig::from_toml(&text)?)
}

fn run(
    scenario: &str,
    seed: Option<u64>,
    pulse_scale: Option<u64>,
    out: &Path,
    format: Format,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let mut config = load_scenario(scenario)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(scale) = pulse_scale {
        config.pulse_scale = scale;
    }
    let scenario = Scenario::new(config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Internal(format!("cannot start worker pool: {e}")))?;
    let run = pool.install(|| scenario.run())?;
    let rows = run.rows();
    emit_results(&rows, &run.meta(), format.into(), out)?;
    info!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn show_presets(show: Option<&str>) -> Result<(), CliError> {
    match show {
        Some(name) => print!("{}", presets::preset(name)?.to_toml()?),
        None => {
            for name in presets::PRESET_NAMES {
                let config = presets::preset(name)?;
                println!(
                    "{name}: {} windows x {} s, pulse_scale {}",
                    config.windows.n_windows, config.windows.window_duration, config.pulse_scale
                );
            }
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            pulse_scale,
            out,
            format,
            threads,
        } => run(&scenario, seed, pulse_scale, &out, format, threads),
        Command::Presets { show } => show_presets(show.as_deref()),
        Command::Validate { scenario } => {
            let config = load_scenario(&scenario)?;
            println!("ok: config_hash={}", config.config_hash());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
