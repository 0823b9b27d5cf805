use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: Option<f64>, tolerance: Option<f64>, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    /// value ≤ tol.
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64, detail: impl Into<String>) -> Self {
        Self::new(name, value <= tol, Some(value), Some(tol), detail)
    }

    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(name, false, None, None, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Seconds; the one field that differs between otherwise identical runs.
    pub wall_time: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects checks, notes and written files for one command.
pub struct RunContext {
    pub dir: PathBuf,
    root: PathBuf,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

impl RunContext {
    pub fn new(root: &Path, sub: &str) -> Result<Self, CliError> {
        let dir = if sub.is_empty() { root.to_path_buf() } else { root.join(sub) };
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunContext {
            dir,
            root: root.to_path_buf(),
            checks: Vec::new(),
            notes: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn note(&mut self, n: impl Into<String>) {
        let n = n.into();
        log::info!("{n}");
        self.notes.push(n);
    }

    fn record(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        let rel = path.strip_prefix(&self.root).unwrap_or(&path).to_string_lossy().replace('\\', "/");
        self.artifacts.push(rel);
        path
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.record(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_csv<R>(&mut self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator<Item = Vec<String>>,
    {
        let path = self.record(name);
        let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn finish(mut self, command: &str, config: &ExperimentConfig, wall_time: f64) -> Result<RunManifest, CliError> {
        let path = self.record("manifest.json");
        let manifest = RunManifest {
            tool: "mixreg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: config_hash(config),
            seed: config.seed,
            wall_time,
            passed: self.passed(),
            checks: self.checks,
            notes: self.notes,
            artifacts: self.artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}

/// Shortest round-trip decimal form; NaN and infinities spelled out.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
