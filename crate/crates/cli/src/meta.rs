//! Run metadata: configuration, seed, input digests and version. No clocks,
//! so identical inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use posefuse_core::ExperimentConfig;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    parameters: &'a BTreeMap<&'a str, Value>,
    inputs: &'a BTreeMap<&'a str, Input>,
}

#[derive(Serialize)]
pub struct Input {
    path: String,
    sha256: String,
}

pub fn file_input(path: &Path) -> anyhow::Result<Input> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Input { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

/// Digest over the named files of a directory, in the given order, each
/// prefixed by its name so renames change the digest.
pub fn dir_input(dir: &Path, names: &[String]) -> anyhow::Result<Input> {
    let mut h = Sha256::new();
    for name in names {
        let bytes = fs::read(dir.join(name)).with_context(|| format!("reading {}", dir.join(name).display()))?;
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(Input { path: dir.display().to_string(), sha256: hex::encode(h.finalize()) })
}

pub fn write_run_json(
    path: &Path,
    command: &str,
    config: &ExperimentConfig,
    parameters: &BTreeMap<&str, Value>,
    inputs: &BTreeMap<&str, Input>,
) -> anyhow::Result<()> {
    let meta = RunMeta { command, version: env!("CARGO_PKG_VERSION"), seed: config.seed, config, parameters, inputs };
    let text = serde_json::to_string_pretty(&meta)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
