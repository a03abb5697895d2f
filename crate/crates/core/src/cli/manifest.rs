use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    pub arguments: Vec<String>,
    pub scenario: Option<String>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    pub summary: BTreeMap<String, Value>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, arguments: Vec<String>) -> Self {
        RunManifest {
            schema: MANIFEST_SCHEMA,
            command: command.to_string(),
            arguments,
            scenario: None,
            config_hash: None,
            seed: None,
            started_at: now(),
            finished_at: None,
            status: RunStatus::Running,
            error: None,
            outputs: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn record<V: Into<Value>>(&mut self, key: &str, value: V) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn load(path: impl AsRef<Path>) -> crate::Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Output directory of one command: refuses to clobber files unless forced
/// and records everything written into the manifest.
pub struct RunDir {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunDir {
    /// Create `dir` and check that none of `planned` (nor the manifest)
    /// exists yet, unless `force` is set.
    pub fn open(dir: &Path, planned: &[String], force: bool, manifest: RunManifest) -> Result<Self, CliError> {
        let mut clashes: Vec<String> = planned
            .iter()
            .map(String::as_str)
            .chain([MANIFEST_FILE])
            .filter(|name| dir.join(name).exists())
            .map(|name| dir.join(name).display().to_string())
            .collect();
        clashes.dedup();
        if !clashes.is_empty() && !force {
            return Err(CliError::Usage(format!(
                "refusing to overwrite existing output (pass --force): {}",
                clashes.join(", ")
            )));
        }
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Note that `name` was written.
    pub fn wrote(&mut self, name: &str) {
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
    }

    fn write_manifest(&mut self) -> crate::Result<()> {
        self.manifest.finished_at = Some(now());
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(self.path(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn succeed(mut self) -> Result<RunManifest, CliError> {
        self.manifest.status = RunStatus::Succeeded;
        self.write_manifest()?;
        Ok(self.manifest)
    }

    /// Write a failure record and hand back the original error.
    pub fn fail(mut self, err: CliError) -> CliError {
        self.manifest.status = RunStatus::Failed;
        self.manifest.error = Some(err.to_string());
        if let Err(e) = self.write_manifest() {
            eprintln!("warning: could not write {MANIFEST_FILE}: {e}");
        }
        err
    }
}
