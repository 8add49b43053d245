//! Applying an action plan to a volume, checkpointing, and scoring against ground truth.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featvol::{extract_features, FeatureMap, FeatureMode, FeatureVolume, Sampler};
use crate::geometry::{DepthImage, Pose};
use crate::grid::Sign;
use crate::mesh::TriangleMesh;
use crate::metrics::{evaluate, EvalConfig, FusionSetup, GroundTruth, MetricsReport};
use crate::posefilter::{plan_actions, Bundle, FilterConfig, FrameId, PlannedAction, PoseStream, ReconAction, Tick};
use crate::store::DepthStore;
use crate::tsdf::TsdfVolume;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Integrate each bundle once and ignore pose updates.
    NoUpdates,
    /// Integrate updated bundles again without removing the stale copy.
    ReintegrateOnly,
    /// Remove the stale copy, then integrate under the updated poses.
    Deintegrate,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::NoUpdates, Strategy::ReintegrateOnly, Strategy::Deintegrate];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::NoUpdates => "no-updates",
            Strategy::ReintegrateOnly => "reintegrate-only",
            Strategy::Deintegrate => "deintegrate",
        }
    }

    pub fn keeps(self, action: &ReconAction) -> bool {
        matches!(
            (self, action),
            (_, ReconAction::Integrate(_))
                | (Strategy::Deintegrate, _)
                | (Strategy::ReintegrateOnly, ReconAction::Reintegrate(_))
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Tsdf,
    /// Single-channel depth features, decoded to a truncated SDF per voxel.
    Featvol,
}

impl Representation {
    pub const ALL: [Representation; 2] = [Representation::Tsdf, Representation::Featvol];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Tsdf => "tsdf",
            Representation::Featvol => "featvol",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown representation {s:?}")))
    }
}

/// The subset of a plan a strategy executes, in plan order.
pub fn filter_actions(actions: &[PlannedAction], strategy: Strategy) -> Vec<PlannedAction> {
    actions.iter().filter(|a| strategy.keeps(&a.action)).cloned().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Volume {
    Tsdf(TsdfVolume),
    Featvol(FeatureVolume),
}

impl Volume {
    pub fn new(representation: Representation, setup: &FusionSetup) -> Result<Self> {
        Ok(match representation {
            Representation::Tsdf => Volume::Tsdf(TsdfVolume::new(setup.grid, setup.truncation)?),
            Representation::Featvol => Volume::Featvol(FeatureVolume::new(setup.grid, 1)?),
        })
    }

    /// Signed distance sample at a voxel, `None` where unobserved.
    pub fn value(&self, index: usize) -> Option<f64> {
        match self {
            Volume::Tsdf(v) => v.tsdf(index),
            Volume::Featvol(v) => v.channel(index, 0),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Volume::Tsdf(v) => v.grid().len(),
            Volume::Featvol(v) => v.grid().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extract_mesh(&self) -> TriangleMesh {
        match self {
            Volume::Tsdf(v) => v.extract_mesh(),
            Volume::Featvol(v) => v.extract_mesh(0),
        }
    }

    pub fn bitwise_eq(&self, other: &Volume) -> bool {
        match (self, other) {
            (Volume::Tsdf(a), Volume::Tsdf(b)) => a.bitwise_eq(b),
            (Volume::Featvol(a), Volume::Featvol(b)) => a.bitwise_eq(b),
            _ => false,
        }
    }

    pub fn write_snapshot(&self, w: impl Write) -> std::io::Result<()> {
        match self {
            Volume::Tsdf(v) => v.write_snapshot(w),
            Volume::Featvol(v) => v.write_snapshot(w),
        }
    }
}

/// What one frame contributed to the volume; replayed verbatim on removal.
#[derive(Clone, Debug)]
enum Payload {
    Depth(DepthImage),
    Features(FeatureMap),
}

/// Re-renders a frame's depth from a pose; used for re-integration when set.
pub type DepthRecompute<'a> = &'a (dyn Fn(FrameId, &Pose) -> DepthImage + Sync);

/// Applies reconstruction actions to one volume, keeping what each live
/// bundle contributed so it can be removed exactly.
pub struct Reconstructor<'a> {
    volume: Volume,
    setup: FusionSetup,
    depths: &'a DepthStore,
    recompute: Option<DepthRecompute<'a>>,
    payloads: HashMap<FrameId, Payload>,
    live: HashMap<u64, Bundle>,
}

impl<'a> Reconstructor<'a> {
    pub fn new(representation: Representation, setup: FusionSetup, depths: &'a DepthStore) -> Result<Self> {
        Ok(Self {
            volume: Volume::new(representation, &setup)?,
            setup,
            depths,
            recompute: None,
            payloads: HashMap::new(),
            live: HashMap::new(),
        })
    }

    pub fn with_recompute(mut self, recompute: DepthRecompute<'a>) -> Self {
        self.recompute = Some(recompute);
        self
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn into_volume(self) -> Volume {
        self.volume
    }

    fn payload_from(&self, frame: FrameId, depth: DepthImage) -> Payload {
        match self.volume {
            Volume::Tsdf(_) => Payload::Depth(depth),
            Volume::Featvol(_) => Payload::Features(extract_features(&depth, FeatureMode::IdentityDepth, frame)),
        }
    }

    fn fuse(&mut self, payload: &Payload, pose: &Pose, sign: Sign) -> Result<()> {
        let k = &self.setup.intrinsics;
        match (&mut self.volume, payload) {
            (Volume::Tsdf(v), Payload::Depth(d)) => v.integrate(d, pose, k, sign),
            (Volume::Featvol(v), Payload::Features(f)) => {
                v.integrate(f, pose, k, sign, Sampler::TruncatedDepth { truncation: self.setup.truncation })
            }
            _ => unreachable!("payload kind follows the volume kind"),
        }
    }

    pub fn apply(&mut self, action: &ReconAction) -> Result<()> {
        match action {
            ReconAction::Integrate(b) | ReconAction::Reintegrate(b) => {
                let rerender = matches!(action, ReconAction::Reintegrate(_)) && self.recompute.is_some();
                for f in &b.frames {
                    let payload = match (rerender, self.payloads.get(&f.frame)) {
                        (false, Some(cached)) => cached.clone(),
                        (true, _) => self.payload_from(f.frame, (self.recompute.expect("checked"))(f.frame, &f.pose)),
                        (false, None) => self.payload_from(f.frame, self.depths.get(f.frame)?.clone()),
                    };
                    self.fuse(&payload, &f.pose, Sign::Integrate)?;
                    self.payloads.insert(f.frame, payload);
                }
                self.live.insert(b.id, b.clone());
            }
            ReconAction::Deintegrate(b) => {
                if !self.live.get(&b.id).is_some_and(|live| live.same_snapshot(b)) {
                    return Err(Error::SnapshotMismatch { bundle: b.id });
                }
                for f in &b.frames {
                    let payload =
                        self.payloads.get(&f.frame).cloned().ok_or(Error::SnapshotMismatch { bundle: b.id })?;
                    self.fuse(&payload, &f.pose, Sign::Deintegrate)?;
                }
                self.live.remove(&b.id);
            }
        }
        Ok(())
    }
}

/// Reconstruction snapshot taken after the tick in which `bundle` was integrated.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub time: Tick,
    pub bundle: u64,
    pub mesh: Arc<TriangleMesh>,
}

#[derive(Debug)]
pub struct Reconstruction {
    pub applied: Vec<PlannedAction>,
    pub checkpoints: Vec<Checkpoint>,
    pub volume: Volume,
}

/// Plans actions for `stream`, keeps those `strategy` executes, and applies
/// them tick by tick. One checkpoint is recorded per Integrate action, after
/// every action of its tick has been applied.
pub fn reconstruct(
    stream: &PoseStream,
    depths: &DepthStore,
    filter: &FilterConfig,
    strategy: Strategy,
    representation: Representation,
    setup: FusionSetup,
    recompute: Option<DepthRecompute<'_>>,
) -> Result<Reconstruction> {
    let applied = filter_actions(&plan_actions(stream, filter), strategy);
    let mut recon = Reconstructor::new(representation, setup, depths)?;
    if let Some(r) = recompute {
        recon = recon.with_recompute(r);
    }
    let mut checkpoints = Vec::new();
    for group in applied.chunk_by(|a, b| a.tick == b.tick) {
        for a in group {
            recon.apply(&a.action)?;
        }
        let integrated: Vec<u64> = group
            .iter()
            .filter_map(|a| matches!(a.action, ReconAction::Integrate(_)).then_some(a.action.bundle().id))
            .collect();
        if !integrated.is_empty() {
            let mesh = Arc::new(recon.volume().extract_mesh());
            for bundle in integrated {
                checkpoints.push(Checkpoint { time: group[0].tick, bundle, mesh: Arc::clone(&mesh) });
            }
        }
    }
    Ok(Reconstruction { applied, checkpoints, volume: recon.into_volume() })
}

/// Which checkpoints [`run_experiment`] scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalScope {
    All,
    Final,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointReport {
    pub t: Tick,
    pub strategy: Strategy,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

#[derive(Debug)]
pub struct Experiment {
    pub reconstruction: Reconstruction,
    /// Checkpoints whose ground truth is empty are omitted.
    pub reports: Vec<CheckpointReport>,
}

impl Experiment {
    pub fn final_report(&self) -> Option<&CheckpointReport> {
        self.reports.last()
    }
}

/// Scores checkpoint meshes against the ground truth at their tick.
pub fn score_checkpoints(
    checkpoints: &[Checkpoint],
    strategy: Strategy,
    ground_truth: &mut GroundTruth<'_>,
    eval: &EvalConfig,
    scope: EvalScope,
) -> Result<Vec<CheckpointReport>> {
    let selected = match scope {
        EvalScope::All => checkpoints,
        EvalScope::Final => &checkpoints[checkpoints.len().saturating_sub(1)..],
    };
    let mut reports = Vec::new();
    for cp in selected {
        let gt = ground_truth.mesh_at(cp.time)?;
        if let Some(metrics) = evaluate(&cp.mesh, &gt, eval) {
            reports.push(CheckpointReport { t: cp.time, strategy, metrics });
        }
    }
    Ok(reports)
}

/// [`reconstruct`] followed by [`score_checkpoints`].
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    stream: &PoseStream,
    depths: &DepthStore,
    filter: &FilterConfig,
    strategy: Strategy,
    representation: Representation,
    ground_truth: &mut GroundTruth<'_>,
    eval: &EvalConfig,
    scope: EvalScope,
) -> Result<Experiment> {
    let setup = *ground_truth.setup();
    let reconstruction = reconstruct(stream, depths, filter, strategy, representation, setup, None)?;
    let reports = score_checkpoints(&reconstruction.checkpoints, strategy, ground_truth, eval, scope)?;
    Ok(Experiment { reconstruction, reports })
}
