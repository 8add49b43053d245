pub mod evaluate;
pub mod reconstruct;
pub mod simulate;
pub mod stats;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use posefuse_core::{ExperimentConfig, Intrinsics, PoseStream};

use crate::meta::{self, Input};
use crate::UsageError;

/// Experiment configuration: a JSON file of every field, then flag overrides.
#[derive(clap::Args, Clone, Debug)]
pub struct ConfigArgs {
    /// JSON file holding a complete experiment configuration.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Reconstruction bounds as min_x,min_y,min_z,max_x,max_y,max_z in meters.
    #[arg(long, value_delimiter = ',', num_args = 6, value_name = "M")]
    bounds: Option<Vec<f64>>,
}

impl ConfigArgs {
    /// The effective configuration and, when a file was given, its digest.
    pub fn load(&self) -> anyhow::Result<(ExperimentConfig, Option<Input>)> {
        let (mut cfg, input) = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let cfg: ExperimentConfig = serde_json::from_str(&text)
                    .map_err(|e| posefuse_core::Error::Json { line: e.line(), message: e.to_string() })
                    .with_context(|| format!("parsing {}", path.display()))?;
                (cfg, Some(meta::file_input(path)?))
            }
            None => (ExperimentConfig::default(), None),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(b) = &self.bounds {
            cfg.bounds_min = [b[0], b[1], b[2]];
            cfg.bounds_max = [b[3], b[4], b[5]];
        }
        cfg.validate().map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
        Ok((cfg, input))
    }
}

/// Camera intrinsics as written by `simulate` to camera.json.
#[derive(clap::Args, Clone, Debug)]
pub struct CameraArgs {
    /// Intrinsics JSON; defaults to the 320×240 desk camera.
    #[arg(long, value_name = "FILE")]
    camera: Option<PathBuf>,
}

impl CameraArgs {
    pub fn load(&self) -> anyhow::Result<(Intrinsics, Option<Input>)> {
        let Some(path) = &self.camera else {
            return Ok((Intrinsics::desk_default(), None));
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let k: Intrinsics = serde_json::from_str(&text)
            .map_err(|e| posefuse_core::Error::Json { line: e.line(), message: e.to_string() })
            .with_context(|| format!("parsing {}", path.display()))?;
        k.validate().with_context(|| format!("camera {}", path.display()))?;
        Ok((k, Some(meta::file_input(path)?)))
    }
}

pub fn read_stream(path: &Path) -> anyhow::Result<PoseStream> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    PoseStream::read_jsonl(BufReader::new(file)).with_context(|| format!("reading pose stream {}", path.display()))
}

/// Every frame id the stream introduces, ascending.
pub fn stream_frames(stream: &PoseStream) -> Vec<u64> {
    let mut ids: Vec<u64> = stream.events().iter().filter(|e| e.is_new_frame).map(|e| e.frame_id).collect();
    ids.sort_unstable();
    ids
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn checkpoint_name(t: u64) -> String {
    format!("checkpoint_{t}.ply")
}

/// Ticks of the `checkpoint_<t>.ply` files in `dir`, ascending. Other files are ignored.
pub fn list_checkpoints(dir: &Path) -> anyhow::Result<Vec<u64>> {
    let mut ticks = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(t) = name.strip_prefix("checkpoint_").and_then(|s| s.strip_suffix(".ply")) {
            if let Ok(t) = t.parse() {
                ticks.push(t);
            }
        }
    }
    ticks.sort_unstable();
    Ok(ticks)
}
