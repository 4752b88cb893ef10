//! What an experiment produces and how it lands on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// One reported number with its reference and, when a tolerance applies,
/// the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub name: String,
    pub value: f64,
    /// Reference value or acceptance window, as text.
    pub target: String,
    pub pass: Option<bool>,
}

impl Headline {
    pub fn info(name: impl Into<String>, value: f64, target: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            target: target.into(),
            pass: None,
        }
    }

    pub fn check(name: impl Into<String>, value: f64, target: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            target: target.into(),
            pass: Some(pass),
        }
    }

    pub fn verdict(&self) -> &'static str {
        match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "-",
        }
    }
}

/// Seeds and effective couplings of one ensemble member or realization.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub label: String,
    pub disorder_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_seed: Option<u64>,
    pub j: Vec<f64>,
    pub b: Vec<f64>,
}

/// In-memory result of an experiment.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    /// `(file name, contents)`; the first entry is the main CSV.
    pub files: Vec<(String, String)>,
    pub headlines: Vec<Headline>,
    pub summary: Vec<String>,
    pub runs: Vec<RunSeeds>,
}

impl Artifacts {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn headline(&self, name: &str) -> Option<&Headline> {
        self.headlines.iter().find(|h| h.name == name)
    }
}

/// Reproducibility record written next to the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub resume_token: String,
    pub rng_algorithm: String,
    pub master_seed: u64,
    pub software_version: String,
    pub workers: usize,
    pub started_unix_s: f64,
    pub wall_clock_s: f64,
    pub resumed_units: usize,
    /// SHA-256 of every output file.
    pub outputs: BTreeMap<String, String>,
    pub headlines: Vec<Headline>,
    pub runs: Vec<RunSeeds>,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Write every file, `summary.txt` and `manifest.json` into `dir`; returns
/// the manifest path.
pub fn write_all(dir: &Path, art: &Artifacts, mut manifest: RunManifest) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut summary = String::new();
    for line in &art.summary {
        summary.push_str(line);
        summary.push('\n');
    }
    if !art.headlines.is_empty() {
        summary.push('\n');
        summary.push_str(&crate::report::headline_table(&manifest.experiment, &art.headlines));
    }
    let mut all: Vec<(&str, &[u8])> = art.files.iter().map(|(n, c)| (n.as_str(), c.as_bytes())).collect();
    all.push(("summary.txt", summary.as_bytes()));
    for (name, bytes) in all {
        write(&dir.join(name), bytes)?;
        manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
    }
    manifest.headlines = art.headlines.clone();
    manifest.runs = art.runs.clone();
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&path, json.as_bytes())?;
    Ok(path)
}
