//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use nalgebra::Vector3;
use posefuse_core::grid::VoxelGrid;
use posefuse_core::posefilter::{plan_actions, FilterConfig, PoseFilter, PoseStream, ReconAction};
use posefuse_core::simulator::{render_depth, Primitive, Scene};
use posefuse_core::{DepthImage, Intrinsics, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_camera() -> Intrinsics {
    Intrinsics::new(60.0, 60.0, 40.0, 30.0, 80, 60).unwrap()
}

/// A 1.6 m cube of 4 cm voxels centered on the origin.
pub fn small_grid() -> VoxelGrid {
    VoxelGrid::from_bounds(Vector3::new(-0.8, -0.8, -0.8), Vector3::new(0.8, 0.8, 0.8), 0.04).unwrap()
}

/// A few spheres and boxes scattered within 0.5 m of the origin.
pub fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let mut prims = Vec::new();
    for _ in 0..rng.random_range(2..5) {
        let c = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
        if rng.random_bool(0.5) {
            prims.push(Primitive::Sphere { center: c, radius: rng.random_range(0.1..0.3) });
        } else {
            let h = [rng.random_range(0.05..0.25), rng.random_range(0.05..0.25), rng.random_range(0.05..0.25)];
            prims.push(Primitive::Box { center: c, half_extents: h });
        }
    }
    Scene::new(prims).unwrap()
}

/// A camera 1.2–2 m from the origin looking at a point near it.
pub fn random_view(rng: &mut ChaCha8Rng) -> Pose {
    loop {
        let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if dir.norm() < 0.2 || dir.norm() > 1.0 {
            continue;
        }
        let eye = dir.normalize() * rng.random_range(1.2..2.0);
        let target =
            Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        if let Ok(p) = Pose::look_at(eye, target, Vector3::z()) {
            return p;
        }
    }
}

pub fn random_views(rng: &mut ChaCha8Rng, scene: &Scene, n: usize, k: &Intrinsics) -> Vec<(DepthImage, Pose)> {
    (0..n)
        .map(|_| {
            let pose = random_view(rng);
            (render_depth(scene, &pose, k), pose)
        })
        .collect()
}

/// Straightforward per-voxel TSDF fusion, written independently of the
/// library's slab-parallel loop. Voxels whose projection lies within `margin`
/// of a pixel boundary or of the truncation cut are reported in `ambiguous`.
pub struct ReferenceTsdf {
    pub sums: Vec<f64>,
    pub weights: Vec<f64>,
    pub ambiguous: Vec<bool>,
}

impl ReferenceTsdf {
    pub fn new(grid: &VoxelGrid) -> Self {
        Self { sums: vec![0.0; grid.len()], weights: vec![0.0; grid.len()], ambiguous: vec![false; grid.len()] }
    }

    pub fn integrate(&mut self, grid: &VoxelGrid, depth: &DepthImage, pose: &Pose, k: &Intrinsics, truncation: f64) {
        let margin = 1e-6;
        let r = pose.rotation();
        let t = pose.translation();
        let [nx, ny, nz] = grid.dims();
        for kk in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = grid.index(i, j, kk);
                    let pw = grid.origin() + Vector3::new(i as f64, j as f64, kk as f64) * grid.voxel_size();
                    let pc = r.transpose() * (pw - t);
                    if pc.z <= 0.0 {
                        continue;
                    }
                    let u = k.fx * pc.x / pc.z + k.cx;
                    let v = k.fy * pc.y / pc.z + k.cy;
                    let near_edge = |x: f64| ((x + 0.5) - (x + 0.5).round()).abs() < margin;
                    if near_edge(u) || near_edge(v) {
                        self.ambiguous[idx] = true;
                    }
                    let (col, row) = ((u + 0.5).floor(), (v + 0.5).floor());
                    if col < 0.0 || row < 0.0 || col >= k.width as f64 || row >= k.height as f64 {
                        continue;
                    }
                    let Some(d) = depth.get(col as usize, row as usize) else { continue };
                    let sdf = d as f64 - pc.z;
                    if (sdf + truncation).abs() < margin {
                        self.ambiguous[idx] = true;
                    }
                    if sdf <= -truncation {
                        continue;
                    }
                    self.sums[idx] += (sdf / truncation).clamp(-1.0, 1.0);
                    self.weights[idx] += 1.0;
                }
            }
        }
    }

    pub fn tsdf(&self, idx: usize) -> Option<f64> {
        (self.weights[idx] > 0.0).then(|| self.sums[idx] / self.weights[idx])
    }
}

#[derive(Debug, Deserialize)]
pub struct ExpectedAction {
    pub tick: u64,
    pub action: String,
    pub bundle: u64,
    pub frames: Vec<u64>,
}

#[derive(Debug, Deserialize)]
pub struct ExpectedPlan {
    pub keyframes: Vec<u64>,
    pub actions: Vec<ExpectedAction>,
}

pub fn expected_plans() -> BTreeMap<String, ExpectedPlan> {
    let text = std::fs::read_to_string(data_dir().join("expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn load_stream(name: &str) -> PoseStream {
    let file = std::fs::File::open(data_dir().join(name)).unwrap();
    PoseStream::read_jsonl(std::io::BufReader::new(file)).unwrap()
}

/// Checks one golden stream against its expected keyframes and action plan.
/// Integrated and re-integrated poses must equal the stream's latest estimate
/// at that tick; de-integrated poses must equal what was last integrated.
pub fn check_golden(name: &str, expected: &ExpectedPlan) -> Result<(), String> {
    let stream = load_stream(name);
    let cfg = FilterConfig::default();
    let mut filter = PoseFilter::new(cfg);
    for (tick, events) in stream.ticks() {
        filter.process_tick(tick, events);
    }
    if filter.keyframes() != expected.keyframes.as_slice() {
        return Err(format!("{name}: keyframes {:?}, expected {:?}", filter.keyframes(), expected.keyframes));
    }
    let plan = plan_actions(&stream, &cfg);
    if plan.len() != expected.actions.len() {
        return Err(format!("{name}: {} actions, expected {}", plan.len(), expected.actions.len()));
    }
    let mut integrated: HashMap<u64, Vec<[f64; 16]>> = HashMap::new();
    for (got, want) in plan.iter().zip(&expected.actions) {
        let b = got.action.bundle();
        let frames: Vec<u64> = b.frames.iter().map(|f| f.frame).collect();
        if got.tick != want.tick || got.action.kind() != want.action || b.id != want.bundle || frames != want.frames {
            return Err(format!(
                "{name}: got {} of bundle {} {frames:?} at {}, expected {want:?}",
                got.action.kind(),
                b.id,
                got.tick
            ));
        }
        let latest: HashMap<u64, [f64; 16]> = stream
            .events()
            .iter()
            .take_while(|e| e.time <= got.tick)
            .map(|e| (e.frame_id, e.pose.to_row_major()))
            .collect();
        let poses: Vec<[f64; 16]> = b.frames.iter().map(|f| f.pose.to_row_major()).collect();
        match &got.action {
            ReconAction::Integrate(_) | ReconAction::Reintegrate(_) => {
                if b.frames.iter().zip(&poses).any(|(f, p)| latest[&f.frame] != *p) {
                    return Err(format!("{name}: bundle {} not snapshotted at tick {}", b.id, got.tick));
                }
                integrated.insert(b.id, poses);
            }
            ReconAction::Deintegrate(_) => {
                if integrated.get(&b.id) != Some(&poses) {
                    return Err(format!("{name}: bundle {} de-integrated with a different snapshot", b.id));
                }
            }
        }
    }
    Ok(())
}
