use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use posefuse_core::simulator::{
    default_orbit, simulate_stream, write_trajectory, DriftConfig, DEFAULT_FRAMES, DEFAULT_SIGMA_R, DEFAULT_SIGMA_T,
};
use posefuse_core::{DepthStore, Intrinsics, Scene};
use serde_json::json;

use super::{create_dir, ConfigArgs};
use crate::meta::{self, Input};
use crate::UsageError;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Scene JSON; defaults to the built-in desk-scale room.
    #[arg(long, value_name = "FILE")]
    scene: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Frames along one full orbit.
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    frames: usize,
    /// Translation random-walk scale, meters per tick.
    #[arg(long, default_value_t = DEFAULT_SIGMA_T)]
    drift_sigma_t: f64,
    /// Rotation random-walk scale, degrees per tick.
    #[arg(long, default_value_t = DEFAULT_SIGMA_R)]
    drift_sigma_r: f64,
    /// Depth image width; intrinsics scale with it.
    #[arg(long, default_value_t = 320)]
    width: usize,
    #[arg(long, default_value_t = 240)]
    height: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

/// The desk camera rescaled to another resolution, principal point centered.
fn scaled_camera(width: usize, height: usize) -> anyhow::Result<Intrinsics> {
    let d = Intrinsics::desk_default();
    let sx = width as f64 / d.width as f64;
    let sy = height as f64 / d.height as f64;
    Intrinsics::new(d.fx * sx, d.fy * sy, width as f64 / 2.0, height as f64 / 2.0, width, height)
        .map_err(|e| UsageError(format!("invalid resolution {width}x{height}: {e}")).into())
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let (cfg, config_input) = args.config.load()?;
    if args.frames == 0 {
        return Err(UsageError("--frames must be at least 1".into()).into());
    }
    let k = scaled_camera(args.width, args.height)?;
    let mut inputs: BTreeMap<&str, Input> = BTreeMap::new();
    let scene = match &args.scene {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            inputs.insert("scene", meta::file_input(path)?);
            Scene::from_json(&text).with_context(|| format!("scene {}", path.display()))?
        }
        None => Scene::default_room(),
    };
    if let Some(c) = config_input {
        inputs.insert("config", c);
    }
    let drift = DriftConfig {
        sigma_t: args.drift_sigma_t,
        sigma_r: args.drift_sigma_r,
        ..DriftConfig::desk_default(cfg.seed, args.frames)
    };
    drift.validate().map_err(|e| UsageError(format!("invalid drift: {e}")))?;

    let run = simulate_stream(&scene, &default_orbit(args.frames), &drift, &k)?;

    create_dir(&args.out)?;
    let write = |name: &str, f: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| -> anyhow::Result<()> {
        let path = args.out.join(name);
        let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))
    };
    write("stream.jsonl", &|w| run.stream.write_jsonl(w))?;
    write("trajectory.jsonl", &|w| write_trajectory(&run.trajectory, w))?;
    write("scene.json", &|w| writeln!(w, "{}", scene.to_json()))?;
    write("camera.json", &|w| writeln!(w, "{}", serde_json::to_string_pretty(&k).map_err(std::io::Error::other)?))?;
    DepthStore::from_frames(run.depths).save_dir(&args.out.join("depth"))?;

    let parameters = BTreeMap::from([
        ("frames", json!(args.frames)),
        (
            "drift",
            json!({
                "sigma_t": drift.sigma_t,
                "sigma_r": drift.sigma_r,
                "loop_closures": drift.loop_closures.iter().map(|lc| json!({
                    "trigger_time": lc.trigger_time,
                    "correction_fraction": lc.correction_fraction,
                })).collect::<Vec<_>>(),
            }),
        ),
        ("camera", serde_json::to_value(k)?),
    ]);
    meta::write_run_json(&args.out.join("run.json"), "simulate", &cfg, &parameters, &inputs)?;
    println!("simulated {} frames, {} update events -> {}", args.frames, run.stream.update_count(), args.out.display());
    Ok(())
}
