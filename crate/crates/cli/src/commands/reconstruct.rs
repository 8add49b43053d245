use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use posefuse_core::simulator::render_depth;
use posefuse_core::{reconstruct, DepthStore, Pose, Representation, Scene, Strategy};
use serde_json::json;

use super::{checkpoint_name, create_dir, read_stream, stream_frames, CameraArgs, ConfigArgs};
use crate::meta::{self, Input};
use crate::UsageError;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_name = "FILE")]
    stream: PathBuf,
    /// Directory of frame_<id>.dpt files.
    #[arg(long, value_name = "DIR")]
    depth_dir: PathBuf,
    #[arg(long, default_value_t = Strategy::Deintegrate)]
    strategy: Strategy,
    #[arg(long, default_value_t = Representation::Tsdf)]
    representation: Representation,
    /// Re-render each frame's depth from its corrected pose before re-integration.
    #[arg(long, requires = "scene")]
    recompute_depth: bool,
    /// Scene JSON used by --recompute-depth.
    #[arg(long, value_name = "FILE")]
    scene: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    camera: CameraArgs,
    #[command(flatten)]
    config: ConfigArgs,
}

pub fn snapshot_name(representation: Representation) -> &'static str {
    match representation {
        Representation::Tsdf => "volume.tsd",
        Representation::Featvol => "volume.fvl",
    }
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let (cfg, config_input) = args.config.load()?;
    let (k, camera_input) = args.camera.load()?;
    let setup = cfg.fusion(k).map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
    let stream = read_stream(&args.stream)?;
    let frames = stream_frames(&stream);
    let depths = DepthStore::load_dir(&args.depth_dir, frames.iter().copied())
        .with_context(|| format!("loading depth from {}", args.depth_dir.display()))?;

    let mut inputs: BTreeMap<&str, Input> = BTreeMap::new();
    inputs.insert("stream", meta::file_input(&args.stream)?);
    let names: Vec<String> = frames.iter().map(|&f| DepthStore::file_name(f)).collect();
    inputs.insert("depth", meta::dir_input(&args.depth_dir, &names)?);
    if let Some(c) = config_input {
        inputs.insert("config", c);
    }
    if let Some(c) = camera_input {
        inputs.insert("camera", c);
    }
    let scene = match (&args.scene, args.recompute_depth) {
        (Some(path), true) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            inputs.insert("scene", meta::file_input(path)?);
            Some(Scene::from_json(&text).with_context(|| format!("scene {}", path.display()))?)
        }
        _ => None,
    };
    let rerender = |_: u64, pose: &Pose| render_depth(scene.as_ref().expect("checked above"), pose, &k);
    let recompute: Option<&(dyn Fn(u64, &Pose) -> _ + Sync)> = scene.as_ref().map(|_| &rerender as _);

    let recon = reconstruct(&stream, &depths, &cfg.filter(), args.strategy, args.representation, setup, recompute)?;

    create_dir(&args.out)?;
    let actions_path = args.out.join("actions.jsonl");
    let mut w = BufWriter::new(
        fs::File::create(&actions_path).with_context(|| format!("creating {}", actions_path.display()))?,
    );
    for a in &recon.applied {
        writeln!(w, "{}", serde_json::to_string(a)?)?;
    }
    w.flush()?;
    let mut written = None;
    for cp in &recon.checkpoints {
        if written == Some(cp.time) {
            continue;
        }
        cp.mesh.save_ply(&args.out.join(checkpoint_name(cp.time)))?;
        written = Some(cp.time);
    }
    let snapshot = args.out.join(snapshot_name(args.representation));
    let mut w =
        BufWriter::new(fs::File::create(&snapshot).with_context(|| format!("creating {}", snapshot.display()))?);
    recon
        .volume
        .write_snapshot(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", snapshot.display()))?;

    let parameters = BTreeMap::from([
        ("strategy", json!(args.strategy)),
        ("representation", json!(args.representation)),
        ("recompute_depth", json!(args.recompute_depth)),
        ("camera", serde_json::to_value(k)?),
    ]);
    meta::write_run_json(&args.out.join("run.json"), "reconstruct", &cfg, &parameters, &inputs)?;
    let count = |kind: &str| recon.applied.iter().filter(|a| a.action.kind() == kind).count();
    println!(
        "{} {}: {} integrate, {} deintegrate, {} reintegrate, {} checkpoints -> {}",
        args.representation,
        args.strategy,
        count("integrate"),
        count("deintegrate"),
        count("reintegrate"),
        recon.checkpoints.len(),
        args.out.display()
    );
    Ok(())
}
