use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::stream::{FrameId, PoseEvent, PoseStream, Tick};
use crate::geometry::Pose;

/// Slack applied to inclusive threshold comparisons so that values constructed
/// to sit exactly on a threshold are not lost to rounding.
pub const THRESHOLD_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Minimum keyframe translation, meters.
    pub keyframe_translation: f64,
    /// Minimum keyframe rotation, degrees.
    pub keyframe_rotation: f64,
    /// Keyframes per bundle.
    pub bundle_size: usize,
    /// Summed per-frame drift (meters) that triggers de- and re-integration.
    pub update_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { keyframe_translation: 0.10, keyframe_rotation: 15.0, bundle_size: 9, update_threshold: 0.45 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyframeDecision {
    Accept,
    Reject,
}

/// Accepts a new frame as keyframe when there is no previous keyframe or it
/// moved at least the translation threshold or turned at least the rotation
/// threshold. Update events never produce keyframes.
pub fn keyframe_filter(event: &PoseEvent, last_keyframe: Option<&Pose>, cfg: &FilterConfig) -> KeyframeDecision {
    if !event.is_new_frame {
        return KeyframeDecision::Reject;
    }
    let Some(last) = last_keyframe else {
        return KeyframeDecision::Accept;
    };
    let moved = event.pose.translation_distance(last) >= cfg.keyframe_translation - THRESHOLD_EPSILON;
    let turned = event.pose.rotation_angle(last) >= cfg.keyframe_rotation - THRESHOLD_EPSILON;
    if moved || turned {
        KeyframeDecision::Accept
    } else {
        KeyframeDecision::Reject
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleFrame {
    pub frame: FrameId,
    pub pose: Pose,
}

/// A group of keyframes with the pose estimates it was (last) integrated with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub id: u64,
    pub created_at: Tick,
    pub frames: Vec<BundleFrame>,
}

impl Bundle {
    pub fn member_frames(&self) -> impl Iterator<Item = FrameId> + '_ {
        self.frames.iter().map(|f| f.frame)
    }

    /// The same members carrying the estimates in `poses`.
    pub fn with_poses(&self, poses: &HashMap<FrameId, Pose>) -> Bundle {
        Bundle {
            id: self.id,
            created_at: self.created_at,
            frames: self.frames.iter().map(|f| BundleFrame { frame: f.frame, pose: poses[&f.frame] }).collect(),
        }
    }

    /// Bitwise comparison of members and poses.
    pub fn same_snapshot(&self, other: &Bundle) -> bool {
        self.id == other.id
            && self.frames.len() == other.frames.len()
            && self.frames.iter().zip(&other.frames).all(|(a, b)| {
                a.frame == b.frame
                    && a.pose
                        .to_row_major()
                        .iter()
                        .zip(b.pose.to_row_major().iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Closes a bundle once `bundle_size` keyframes are pending, snapshotting
/// their current estimates. The pending list is drained on success.
pub fn assemble_bundle(
    pending: &mut Vec<FrameId>,
    bundle_size: usize,
    id: u64,
    created_at: Tick,
    poses: &HashMap<FrameId, Pose>,
) -> Option<Bundle> {
    if pending.len() < bundle_size {
        return None;
    }
    let frames = pending.drain(..).map(|frame| BundleFrame { frame, pose: poses[&frame] }).collect();
    Some(Bundle { id, created_at, frames })
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdatePlan {
    pub stale: Bundle,
    pub fresh: Bundle,
    pub drift: f64,
}

/// Sum over members of the translation between the integrated and current estimate.
pub fn bundle_drift(bundle: &Bundle, current: &HashMap<FrameId, Pose>) -> f64 {
    bundle.frames.iter().map(|f| f.pose.translation_distance(&current[&f.frame])).sum()
}

pub fn detect_update(bundle: &Bundle, current: &HashMap<FrameId, Pose>, threshold: f64) -> Option<UpdatePlan> {
    let drift = bundle_drift(bundle, current);
    (drift >= threshold - THRESHOLD_EPSILON).then(|| UpdatePlan {
        stale: bundle.clone(),
        fresh: bundle.with_poses(current),
        drift,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "bundle", rename_all = "lowercase")]
pub enum ReconAction {
    Integrate(Bundle),
    Deintegrate(Bundle),
    Reintegrate(Bundle),
}

impl ReconAction {
    pub fn bundle(&self) -> &Bundle {
        match self {
            ReconAction::Integrate(b) | ReconAction::Deintegrate(b) | ReconAction::Reintegrate(b) => b,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ReconAction::Integrate(_) => "integrate",
            ReconAction::Deintegrate(_) => "deintegrate",
            ReconAction::Reintegrate(_) => "reintegrate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedAction {
    pub tick: Tick,
    #[serde(flatten)]
    pub action: ReconAction,
}

/// The filtering layer between SLAM and reconstruction, as a pure state machine.
///
/// Feed it one tick at a time with [`PoseFilter::process_tick`] and call
/// [`PoseFilter::finish`] at end of stream.
#[derive(Clone, Debug)]
pub struct PoseFilter {
    cfg: FilterConfig,
    current: HashMap<FrameId, Pose>,
    last_keyframe: Option<Pose>,
    pending: Vec<FrameId>,
    integrated: Vec<Bundle>,
    next_bundle_id: u64,
    last_tick: Option<Tick>,
    keyframes: Vec<FrameId>,
}

impl PoseFilter {
    pub fn new(cfg: FilterConfig) -> Self {
        Self {
            cfg,
            current: HashMap::new(),
            last_keyframe: None,
            pending: Vec::new(),
            integrated: Vec::new(),
            next_bundle_id: 0,
            last_tick: None,
            keyframes: Vec::new(),
        }
    }

    /// Frames accepted as keyframes so far, in order.
    pub fn keyframes(&self) -> &[FrameId] {
        &self.keyframes
    }

    pub fn current_poses(&self) -> &HashMap<FrameId, Pose> {
        &self.current
    }

    /// Applies all events of one tick, then scans integrated bundles in
    /// creation order, emitting at most one de-/re-integration pair each.
    pub fn process_tick(&mut self, tick: Tick, events: &[PoseEvent]) -> Vec<PlannedAction> {
        let mut out = Vec::new();
        self.last_tick = Some(tick);
        for e in events {
            self.current.insert(e.frame_id, e.pose);
            if !e.is_new_frame {
                continue;
            }
            if keyframe_filter(e, self.last_keyframe.as_ref(), &self.cfg) == KeyframeDecision::Accept {
                self.last_keyframe = Some(e.pose);
                self.keyframes.push(e.frame_id);
                self.pending.push(e.frame_id);
                if let Some(b) =
                    assemble_bundle(&mut self.pending, self.cfg.bundle_size, self.next_bundle_id, tick, &self.current)
                {
                    self.next_bundle_id += 1;
                    out.push(PlannedAction { tick, action: ReconAction::Integrate(b.clone()) });
                    self.integrated.push(b);
                }
            }
        }
        for bundle in &mut self.integrated {
            if let Some(plan) = detect_update(bundle, &self.current, self.cfg.update_threshold) {
                out.push(PlannedAction { tick, action: ReconAction::Deintegrate(plan.stale) });
                out.push(PlannedAction { tick, action: ReconAction::Reintegrate(plan.fresh.clone()) });
                *bundle = plan.fresh;
            }
        }
        out
    }

    /// Flushes a trailing partial bundle so no keyframe is dropped.
    pub fn finish(&mut self) -> Vec<PlannedAction> {
        let (Some(tick), false) = (self.last_tick, self.pending.is_empty()) else {
            return Vec::new();
        };
        let b = assemble_bundle(&mut self.pending, 1, self.next_bundle_id, tick, &self.current)
            .expect("pending is non-empty");
        self.next_bundle_id += 1;
        self.integrated.push(b.clone());
        vec![PlannedAction { tick, action: ReconAction::Integrate(b) }]
    }
}

/// Deterministic action plan for a whole stream.
pub fn plan_actions(stream: &PoseStream, cfg: &FilterConfig) -> Vec<PlannedAction> {
    let mut filter = PoseFilter::new(*cfg);
    let mut actions = Vec::new();
    for (tick, events) in stream.ticks() {
        actions.extend(filter.process_tick(tick, events));
    }
    actions.extend(filter.finish());
    actions
}
