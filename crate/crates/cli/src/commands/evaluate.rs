use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use posefuse_core::metrics::GroundTruth;
use posefuse_core::pipeline::CheckpointReport;
use posefuse_core::posefilter::{plan_actions, ReconAction};
use posefuse_core::{evaluate, DepthStore, Strategy, TriangleMesh};
use serde_json::json;

use super::{checkpoint_name, list_checkpoints, read_stream, stream_frames, CameraArgs, ConfigArgs};
use crate::meta::{self, Input};
use crate::UsageError;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Output directory of `reconstruct`.
    #[arg(long, value_name = "DIR")]
    pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    stream: PathBuf,
    /// Depth frames for building ground truth from the stream's latest poses.
    #[arg(long, value_name = "DIR", required_unless_present = "gt_dir")]
    depth_dir: Option<PathBuf>,
    /// Use the checkpoint meshes in this directory as ground truth instead.
    #[arg(long, value_name = "DIR", conflicts_with = "depth_dir")]
    gt_dir: Option<PathBuf>,
    /// Strategy label for the reports; read from the prediction's run.json when omitted.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// One JSON report per checkpoint.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Aggregate CSV; defaults to the report path with a .csv extension.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    camera: CameraArgs,
    #[command(flatten)]
    config: ConfigArgs,
}

fn strategy_from_run(pred: &Path) -> anyhow::Result<Strategy> {
    let path = pred.join("run.json");
    let text =
        fs::read_to_string(&path).map_err(|_| UsageError(format!("{} not found; pass --strategy", path.display())))?;
    let meta: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let name =
        meta["parameters"]["strategy"].as_str().with_context(|| format!("{} records no strategy", path.display()))?;
    name.parse().with_context(|| format!("{}: strategy", path.display()))
}

fn describe(ticks: &BTreeSet<u64>) -> String {
    ticks.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
}

/// Fails listing the differences when `found` is not exactly `expected`.
fn require_same(label: &str, found: &BTreeSet<u64>, expected: &BTreeSet<u64>) -> anyhow::Result<()> {
    let missing: BTreeSet<u64> = expected.difference(found).copied().collect();
    let extra: BTreeSet<u64> = found.difference(expected).copied().collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(());
    }
    let mut msg = format!("{label} checkpoints do not match the stream's integrate ticks");
    if !missing.is_empty() {
        msg += &format!("; missing: {}", describe(&missing));
    }
    if !extra.is_empty() {
        msg += &format!("; unexpected: {}", describe(&extra));
    }
    bail!(msg)
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let (cfg, config_input) = args.config.load()?;
    let (k, camera_input) = args.camera.load()?;
    let setup = cfg.fusion(k).map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
    let strategy = match args.strategy {
        Some(s) => s,
        None => strategy_from_run(&args.pred)?,
    };
    let stream = read_stream(&args.stream)?;

    let pred_ticks: BTreeSet<u64> = list_checkpoints(&args.pred)?.into_iter().collect();
    if pred_ticks.is_empty() {
        bail!("no checkpoint_<t>.ply files in {}", args.pred.display());
    }
    let expected: BTreeSet<u64> = plan_actions(&stream, &cfg.filter())
        .iter()
        .filter(|a| matches!(a.action, ReconAction::Integrate(_)))
        .map(|a| a.tick)
        .collect();
    require_same("prediction", &pred_ticks, &expected)?;

    let mut inputs: BTreeMap<&str, Input> = BTreeMap::new();
    inputs.insert("stream", meta::file_input(&args.stream)?);
    let pred_names: Vec<String> = pred_ticks.iter().map(|&t| checkpoint_name(t)).collect();
    inputs.insert("pred", meta::dir_input(&args.pred, &pred_names)?);
    if let Some(c) = config_input {
        inputs.insert("config", c);
    }
    if let Some(c) = camera_input {
        inputs.insert("camera", c);
    }

    let depths = match (&args.depth_dir, &args.gt_dir) {
        (Some(dir), _) => {
            let frames = stream_frames(&stream);
            let names: Vec<String> = frames.iter().map(|&f| DepthStore::file_name(f)).collect();
            let store = DepthStore::load_dir(dir, frames.iter().copied())
                .with_context(|| format!("loading depth from {}", dir.display()))?;
            inputs.insert("depth", meta::dir_input(dir, &names)?);
            store
        }
        (None, Some(dir)) => {
            let gt_ticks: BTreeSet<u64> = list_checkpoints(dir)?.into_iter().collect();
            require_same("ground-truth", &gt_ticks, &expected)?;
            inputs.insert("ground_truth", meta::dir_input(dir, &pred_names)?);
            DepthStore::default()
        }
        (None, None) => unreachable!("clap requires one of --depth-dir and --gt-dir"),
    };
    let mut ground_truth = GroundTruth::new(&stream, &depths, setup);
    let mut gt_at = |t: u64| -> anyhow::Result<Arc<TriangleMesh>> {
        match &args.gt_dir {
            Some(dir) => Ok(Arc::new(TriangleMesh::load_ply(&dir.join(checkpoint_name(t)))?)),
            None => Ok(ground_truth.mesh_at(t)?),
        }
    };

    let eval = cfg.eval();
    let mut reports = Vec::new();
    for &t in &pred_ticks {
        let pred = TriangleMesh::load_ply(&args.pred.join(checkpoint_name(t)))?;
        let gt = gt_at(t)?;
        if let Some(metrics) = evaluate(&pred, &gt, &eval) {
            reports.push(CheckpointReport { t, strategy, metrics });
        }
    }

    let mut w =
        BufWriter::new(fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    for r in &reports {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()?;
    let csv_path = args.csv.clone().unwrap_or_else(|| args.out.with_extension("csv"));
    let mut w =
        BufWriter::new(fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?);
    writeln!(w, "t,strategy,accuracy,completeness,chamfer,precision,recall,fscore")?;
    for r in &reports {
        let m = &r.metrics;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.t, r.strategy, m.accuracy, m.completeness, m.chamfer, m.precision, m.recall, m.fscore
        )?;
    }
    w.flush()?;

    let parameters = BTreeMap::from([
        ("strategy", json!(strategy)),
        ("ground_truth", json!(if args.gt_dir.is_some() { "meshes" } else { "fused" })),
    ]);
    // Several evaluations may share a directory, so metadata sits beside the report.
    meta::write_run_json(&args.out.with_extension("run.json"), "evaluate", &cfg, &parameters, &inputs)?;
    match reports.last() {
        Some(r) => println!(
            "{strategy}: {} checkpoints scored; final t={} acc {:.4} comp {:.4} chamfer {:.4} P {:.4} R {:.4} F {:.4}",
            reports.len(),
            r.t,
            r.metrics.accuracy,
            r.metrics.completeness,
            r.metrics.chamfer,
            r.metrics.precision,
            r.metrics.recall,
            r.metrics.fscore
        ),
        None => println!("{strategy}: no checkpoint had non-empty ground truth"),
    }
    Ok(())
}
