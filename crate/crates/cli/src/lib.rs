//! Experiment runner for the mecsim models: TOML configs in, CSV and a JSON
//! manifest out.

pub mod config;
pub mod experiment;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{load_config, parse_config, Case, CaseConfig, ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, ExperimentResult, Rows};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} of {1} sweep points failed")]
    PartialFailure(usize, usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::PartialFailure(..) => 1,
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub result: ExperimentResult,
}

/// Loads, runs and writes one experiment. Failed points are still listed in
/// the manifest before the error is returned.
pub fn run_config_file(path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<RunSummary, CliError> {
    let config = load_config(path, seed)?;
    let start = Instant::now();
    let result = run_experiment(&config);
    let (csv, manifest) = output::write_outputs(out_dir, &config, &result, start.elapsed())?;
    let failed = result.failures().count();
    if failed > 0 {
        for (label, e) in result.failures() {
            eprintln!("point {}: {e}", label.as_deref().unwrap_or("(base)"));
        }
        return Err(CliError::PartialFailure(failed, result.points.len()));
    }
    Ok(RunSummary { csv, manifest, result })
}
