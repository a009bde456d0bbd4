//! Provenance record written into every output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
    pub git_describe: String,
    pub status: String,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// `git describe --always --dirty` of the working directory, or `unknown`.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

impl RunManifest {
    pub fn begin(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            command: command.into(),
            config_hash,
            seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started_at: unix_now(),
            finished_at: 0,
            git_describe: git_describe(),
            status: "running".into(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), path.to_path_buf());
    }

    /// Records the regular files present in `dir` (except the manifest)
    /// and writes the manifest there.
    pub fn finish(mut self, dir: &Path, status: &str) -> Result<()> {
        let mut outputs: Vec<String> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST_FILE)
            .collect();
        outputs.sort();
        self.outputs = outputs;
        self.finished_at = unix_now();
        self.status = status.into();
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }
}
