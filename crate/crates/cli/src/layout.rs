//! Output directory layout.

use std::fs;
use std::path::{Path, PathBuf};

use soupbench::metrics::DistanceKind;
use soupbench::soup::Algorithm;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

pub fn run_name(trial: u32, env: usize) -> String {
    format!("trial{trial}_env{env}")
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    /// Wall-clock log; the only output that differs between identical runs.
    pub fn run_log(&self) -> PathBuf {
        self.root.join("run.log")
    }

    pub fn bundle(&self, trial: u32, env: usize) -> PathBuf {
        self.root.join("bundles").join(run_name(trial, env))
    }

    pub fn trajectory(&self, trial: u32, env: usize, algo: Algorithm) -> PathBuf {
        self.root.join("trajectories").join(run_name(trial, env)).join(format!("{}.json", algo.name()))
    }

    pub fn analysis(&self) -> PathBuf {
        self.root.join("analysis")
    }

    pub fn mds(&self, trial: u32, env: usize, kind: DistanceKind, ext: &str) -> PathBuf {
        self.root.join("mds").join(run_name(trial, env)).join(format!("{}.{ext}", kind.name()))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }

    /// Writes `{config_hash, config}`.
    pub fn write_config(&self, cfg: &RunConfig) -> Result<(), CliError> {
        let doc = serde_json::json!({ "config_hash": cfg.hash(), "config": cfg });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        write(&self.config(), text.as_bytes())
    }

    /// Config saved by an earlier stage, if any.
    pub fn saved_config(&self) -> Result<Option<RunConfig>, CliError> {
        let path = self.config();
        if !path.exists() {
            return Ok(None);
        }
        let text = read(&path)?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let cfg = doc.get("config").cloned().unwrap_or(serde_json::Value::Null);
        serde_json::from_value(cfg).map(Some).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// CSV text with a leading `# config_hash:` line.
pub fn stamped_csv(hash: &str, body: &str) -> String {
    format!("# config_hash: {hash}\n{body}")
}
