//! `manifest.json`: config hash, seed, tool version and the hash of every
//! file each command read or wrote. Contains no timestamps, so re-running a
//! command reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE: &str = "manifest.json";

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub sim_seed: u64,
    pub commands: BTreeMap<String, CommandRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Records one command's inputs and outputs. Records from earlier commands
/// are kept when they ran against the same config.
pub fn record(
    dir: &Path,
    config_bytes: &[u8],
    seed: u64,
    sim_seed: u64,
    command: &str,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let config_sha256 = sha256_hex(config_bytes);
    let path = dir.join(FILE);
    let mut manifest = fs::read(&path)
        .ok()
        .and_then(|b| serde_json::from_slice::<Manifest>(&b).ok())
        .filter(|m| m.config_sha256 == config_sha256)
        .unwrap_or_else(|| Manifest {
            tool: "pdm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256,
            seed,
            sim_seed,
            commands: BTreeMap::new(),
        });
    let mut rec = CommandRecord::default();
    for p in inputs {
        let key = p.strip_prefix(dir).unwrap_or(p);
        rec.inputs.insert(key.display().to_string(), file_sha256(p)?);
    }
    for p in outputs {
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        rec.outputs.insert(name, file_sha256(p)?);
    }
    manifest.commands.insert(command.to_string(), rec);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
