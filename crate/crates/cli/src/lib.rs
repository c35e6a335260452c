//! Config-driven experiment harness on top of `slowfast-core`.
//!
//! A run resolves an [`ExperimentConfig`], simulates its realizations in the
//! current rayon pool and returns a [`ResultTable`] that is written as CSV
//! with a `.meta.json` sidecar.

pub mod bundled;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{ConfigFile, ExperimentConfig, ExperimentKind, Suite};
pub use error::{CliError, Result};
pub use experiment::run_experiment;
pub use output::{emit_csv, parse_csv, Metadata, ResultTable, Table};

/// Reads `source` as a file if it exists, otherwise as the name of a bundled config.
pub fn load_config(source: &str) -> Result<ConfigFile> {
    let path = Path::new(source);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return ConfigFile::parse(&text);
    }
    match bundled::bundled(source) {
        Some(text) => ConfigFile::parse(text),
        None => Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or bundled experiment"),
        )),
    }
}

/// Runs every experiment of `file` and writes its outputs.
///
/// A single run writes to `out` (or its own `output`); a suite writes each
/// run's `output` inside the directory `out` (default: current directory).
pub fn run_config(file: &ConfigFile, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for run in file.runs() {
        let path = match (file, out) {
            (ConfigFile::Single(_), Some(p)) => p.to_path_buf(),
            (ConfigFile::Single(_), None) => PathBuf::from(&run.output),
            (ConfigFile::Suite(_), dir) => dir.unwrap_or(Path::new(".")).join(&run.output),
        };
        let result = run_experiment(run)?;
        written.extend(result.write(&path)?);
    }
    Ok(written)
}
