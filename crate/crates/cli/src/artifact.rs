//! Versioned JSON artifacts and the per-directory run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub kind: String,
    pub command: String,
    pub seed: u64,
    pub payload: T,
}

pub fn write<T: Serialize>(
    path: &Path,
    kind: &str,
    command: &str,
    seed: u64,
    payload: &T,
) -> Result<()> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        kind: kind.to_string(),
        command: command.to_string(),
        seed,
        payload,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Envelope<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: Envelope<serde_json::Value> = serde_json::from_str(&text)
        .with_context(|| format!("parsing artifact {}", path.display()))?;
    if raw.kind != kind {
        bail!(
            "{} holds a {:?} artifact, expected {:?}",
            path.display(),
            raw.kind,
            kind
        );
    }
    if raw.schema_version != SCHEMA_VERSION {
        bail!(
            "{} has schema version {}, this build reads {}",
            path.display(),
            raw.schema_version,
            SCHEMA_VERSION
        );
    }
    let payload = serde_json::from_value(raw.payload)
        .with_context(|| format!("parsing {} payload of {}", kind, path.display()))?;
    Ok(Envelope {
        schema_version: raw.schema_version,
        kind: raw.kind,
        command: raw.command,
        seed: raw.seed,
        payload,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEntry {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub jobs: usize,
    pub timings: Vec<StageTime>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub runs: Vec<RunEntry>,
}

/// Appends `entry` to `<dir>/manifest.json`.
pub fn record_run(dir: &Path, entry: RunEntry) -> Result<()> {
    let path = dir.join("manifest.json");
    let mut manifest = if path.exists() {
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        Manifest::default()
    };
    manifest.schema_version = SCHEMA_VERSION;
    manifest.runs.push(entry);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
