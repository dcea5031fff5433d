//! Run manifest: a JSON snapshot of what a command ran and what it wrote.
//!
//! The manifest is written atomically at the end of a run. Re-running with
//! the recorded config and seed reproduces every listed data file
//! bit-exactly; the manifest itself records wall-clock duration and is
//! therefore metadata rather than data.

use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::CliError;

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Snapshot of the effective configuration (parsed config file or
    /// command-line arguments).
    pub config: Value,
    /// Data files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

/// Collects outputs during a run and writes the manifest at the end.
pub struct ManifestBuilder {
    command: String,
    seed: u64,
    config: Value,
    outputs: Vec<String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config,
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Record a written file, stored relative to `out_dir` when possible.
    pub fn record(&mut self, out_dir: &Path, path: &Path) {
        let relative = path.strip_prefix(out_dir).unwrap_or(path);
        self.outputs.push(relative.display().to_string());
    }

    /// Write the manifest atomically into `out_dir`.
    pub fn write(mut self, out_dir: &Path) -> Result<PathBuf, CliError> {
        self.outputs.sort();
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            seed: self.seed,
            config: self.config,
            outputs: self.outputs,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = out_dir.join(MANIFEST_NAME);
        let temp = out_dir.join(format!("{MANIFEST_NAME}.tmp"));
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Data(format!("manifest serialization: {e}")))?;
        std::fs::write(&temp, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", temp.display())))?;
        std::fs::rename(&temp, &path)
            .map_err(|e| CliError::Data(format!("cannot move manifest into place: {e}")))?;
        Ok(path)
    }
}
