use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::Result;
use crate::geometry::{Intrinsics, Pose};
use crate::grid::{Sign, VoxelGrid};
use crate::mesh::TriangleMesh;
use crate::posefilter::{FrameId, PoseStream, Tick};
use crate::store::DepthStore;
use crate::tsdf::TsdfVolume;

/// Latest estimate at time `t` of every frame introduced by then.
pub fn poses_at(stream: &PoseStream, t: Tick) -> BTreeMap<FrameId, Pose> {
    let mut poses = BTreeMap::new();
    for e in stream.events().iter().take_while(|e| e.time <= t) {
        poses.insert(e.frame_id, e.pose);
    }
    poses
}

/// Volume parameters shared by ground truth and reconstructions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionSetup {
    pub grid: VoxelGrid,
    pub truncation: f64,
    pub intrinsics: Intrinsics,
}

/// Fuses every listed frame's depth at the given pose into a fresh volume.
pub fn fuse_from_scratch(
    depths: &DepthStore,
    poses: &BTreeMap<FrameId, Pose>,
    setup: &FusionSetup,
) -> Result<TsdfVolume> {
    let mut vol = TsdfVolume::new(setup.grid, setup.truncation)?;
    for (frame, pose) in poses {
        vol.integrate(depths.get(*frame)?, pose, &setup.intrinsics, Sign::Integrate)?;
    }
    Ok(vol)
}

/// Ground-truth mesh at time `t`: all depths up to `t` fused with the poses as estimated at `t`.
pub fn ground_truth_at(t: Tick, stream: &PoseStream, depths: &DepthStore, setup: &FusionSetup) -> Result<TriangleMesh> {
    let poses = poses_at(stream, t);
    if poses.is_empty() {
        return Ok(TriangleMesh::default());
    }
    Ok(fuse_from_scratch(depths, &poses, setup)?.extract_mesh())
}

/// Memoized [`ground_truth_at`] for increasing query times.
///
/// When no previously fused pose changed, new frames are added to the running
/// volume instead of refusing everything. Fused contributions are exact
/// multiples of a fixed quantum, so the result is bitwise identical to a fresh
/// fusion in either case.
pub struct GroundTruth<'a> {
    stream: &'a PoseStream,
    depths: &'a DepthStore,
    setup: FusionSetup,
    volume: Option<TsdfVolume>,
    fused: BTreeMap<FrameId, Pose>,
    fused_at: Option<Tick>,
    meshes: BTreeMap<Tick, Arc<TriangleMesh>>,
}

impl<'a> GroundTruth<'a> {
    pub fn new(stream: &'a PoseStream, depths: &'a DepthStore, setup: FusionSetup) -> Self {
        Self { stream, depths, setup, volume: None, fused: BTreeMap::new(), fused_at: None, meshes: BTreeMap::new() }
    }

    pub fn setup(&self) -> &FusionSetup {
        &self.setup
    }

    pub fn mesh_at(&mut self, t: Tick) -> Result<Arc<TriangleMesh>> {
        if let Some(mesh) = self.meshes.get(&t) {
            return Ok(Arc::clone(mesh));
        }
        let poses = poses_at(self.stream, t);
        let reusable = self.fused_at.is_some_and(|at| at <= t)
            && self.fused.iter().all(|(f, p)| poses.get(f).is_some_and(|q| same_bits(p, q)));
        let volume = match (reusable, self.volume.take()) {
            (true, Some(mut vol)) => {
                for (frame, pose) in poses.iter().filter(|(f, _)| !self.fused.contains_key(f)) {
                    vol.integrate(self.depths.get(*frame)?, pose, &self.setup.intrinsics, Sign::Integrate)?;
                }
                vol
            }
            _ => fuse_from_scratch(self.depths, &poses, &self.setup)?,
        };
        let mesh = Arc::new(if poses.is_empty() { TriangleMesh::default() } else { volume.extract_mesh() });
        self.volume = Some(volume);
        self.fused = poses;
        self.fused_at = Some(t);
        self.meshes.insert(t, Arc::clone(&mesh));
        Ok(mesh)
    }
}

fn same_bits(a: &Pose, b: &Pose) -> bool {
    a.to_row_major().iter().zip(b.to_row_major().iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posefilter::PoseEvent;
    use crate::simulator::{default_orbit, render_depth, Scene};
    use nalgebra::Vector3;

    fn setup() -> FusionSetup {
        let grid = VoxelGrid::from_bounds(Vector3::new(-1.6, -1.6, -0.1), Vector3::new(1.6, 1.6, 1.5), 0.04).unwrap();
        FusionSetup { grid, truncation: 0.12, intrinsics: Intrinsics::new(60.0, 60.0, 40.0, 30.0, 80, 60).unwrap() }
    }

    fn fixture(frames: usize) -> (PoseStream, DepthStore, Scene) {
        let scene = Scene::default_room();
        let traj = default_orbit(frames);
        let s = setup();
        let depths = DepthStore::from_frames(traj.iter().map(|p| render_depth(&scene, p, &s.intrinsics)).collect());
        let mut events: Vec<_> =
            traj.iter().enumerate().map(|(t, p)| PoseEvent::new_frame(t as u64, t as u64, *p)).collect();
        let last = frames as u64 - 1;
        events.push(PoseEvent::update(last, 0, Pose::from_translation(0.2, 0.0, 0.0).compose(&traj[0])));
        (PoseStream::new(events).unwrap(), depths, scene)
    }

    #[test]
    fn before_first_frame_is_empty() {
        let (stream, depths, _) = fixture(3);
        let shifted =
            PoseStream::new(stream.events().iter().map(|e| PoseEvent { time: e.time + 5, ..*e }).collect()).unwrap();
        assert!(ground_truth_at(2, &shifted, &depths, &setup()).unwrap().is_empty());
    }

    #[test]
    fn single_frame_lies_on_scene() {
        let (stream, depths, scene) = fixture(4);
        let mesh = ground_truth_at(0, &stream, &depths, &setup()).unwrap();
        assert!(!mesh.is_empty());
        // Silhouette edges leave a thin fringe inside the truncation band.
        let near = mesh.vertices.iter().filter(|v| scene.sdf(v).abs() <= 0.04).count();
        assert!(near as f64 >= 0.95 * mesh.vertices.len() as f64, "{near} of {}", mesh.vertices.len());
        assert!(mesh.vertices.iter().all(|v| scene.sdf(v).abs() <= 0.12 + 0.04));
    }

    #[test]
    fn cache_matches_fresh_fusion_across_updates() {
        let (stream, depths, _) = fixture(6);
        let mut gt = GroundTruth::new(&stream, &depths, setup());
        for t in 0..6 {
            let fresh = ground_truth_at(t, &stream, &depths, &setup()).unwrap();
            assert_eq!(*gt.mesh_at(t).unwrap(), fresh, "t = {t}");
        }
        assert_ne!(*gt.mesh_at(5).unwrap(), ground_truth_at(4, &stream, &depths, &setup()).unwrap());
    }
}
