//! Synthetic SLAM stand-in: analytic scenes, a depth sensor, a ground-truth
//! orbit, and a seeded drift model with loop closures.

mod drift;
mod render;
mod scene;

use std::io::{BufRead, Write};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use drift::{correct_toward, simulate_poses, DriftConfig, LoopClosure};
pub use render::{render_depth, HIT_EPSILON, MAX_RANGE, MAX_STEPS};
pub use scene::{Primitive, Scene};

use crate::error::{Error, Result};
use crate::geometry::{DepthImage, Intrinsics, Pose};
use crate::posefilter::PoseStream;

/// Desk-scale translation drift, meters per tick.
pub const DEFAULT_SIGMA_T: f64 = 0.002;
/// Desk-scale rotation drift, degrees per tick.
pub const DEFAULT_SIGMA_R: f64 = 0.2;
pub const DEFAULT_FRAMES: usize = 300;

impl DriftConfig {
    /// Random walk at the desk-scale sigmas with one full correction on the last tick.
    pub fn desk_default(seed: u64, frames: usize) -> Self {
        Self {
            seed,
            sigma_t: DEFAULT_SIGMA_T,
            sigma_r: DEFAULT_SIGMA_R,
            loop_closures: vec![LoopClosure {
                trigger_time: frames.saturating_sub(1) as u64,
                correction_fraction: 1.0,
            }],
        }
    }
}

/// Circular orbit at constant height, gazing at `target`, world z up.
/// Frames are spaced evenly over one full revolution.
pub fn orbit_trajectory(frames: usize, radius: f64, height: f64, target: Vector3<f64>) -> Vec<Pose> {
    (0..frames)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / frames as f64;
            let eye = Vector3::new(target.x + radius * a.cos(), target.y + radius * a.sin(), height);
            Pose::look_at(eye, target, Vector3::z()).expect("orbit eye never coincides with target")
        })
        .collect()
}

/// The orbit used by the default room scene.
pub fn default_orbit(frames: usize) -> Vec<Pose> {
    orbit_trajectory(frames, 2.2, 1.5, Vector3::new(0.0, 0.0, 0.4))
}

/// Everything the sensor and SLAM system produce for one run.
#[derive(Clone, Debug)]
pub struct SimulatedRun {
    pub stream: PoseStream,
    /// Rendered from the true pose; index equals frame id.
    pub depths: Vec<DepthImage>,
    pub trajectory: Vec<Pose>,
}

pub fn simulate_stream(scene: &Scene, trajectory: &[Pose], cfg: &DriftConfig, k: &Intrinsics) -> Result<SimulatedRun> {
    let stream = simulate_poses(trajectory, cfg)?;
    let depths = trajectory.par_iter().map(|pose| render_depth(scene, pose, k)).collect();
    Ok(SimulatedRun { stream, depths, trajectory: trajectory.to_vec() })
}

#[derive(Serialize, Deserialize)]
struct TrajectoryLine {
    t: u64,
    pose: Pose,
}

pub fn write_trajectory(trajectory: &[Pose], mut w: impl Write) -> std::io::Result<()> {
    for (t, pose) in trajectory.iter().enumerate() {
        let line =
            serde_json::to_string(&TrajectoryLine { t: t as u64, pose: *pose }).map_err(std::io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory`]; lines must be numbered 0, 1, 2, ...
pub fn read_trajectory(r: impl BufRead) -> Result<Vec<Pose>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("reading trajectory", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TrajectoryLine =
            serde_json::from_str(&line).map_err(|e| Error::Json { line: n + 1, message: e.to_string() })?;
        if parsed.t != out.len() as u64 {
            return Err(Error::Format(format!("trajectory line {} has t={}, expected {}", n + 1, parsed.t, out.len())));
        }
        out.push(parsed.pose);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_gazes_at_target() {
        let target = Vector3::new(0.0, 0.0, 0.4);
        for pose in default_orbit(12) {
            let in_cam = pose.inverse().transform_point(&target);
            assert!(in_cam.x.abs() < 1e-9 && in_cam.y.abs() < 1e-9 && in_cam.z > 0.0);
        }
    }

    #[test]
    fn same_seed_same_stream_bytes() {
        let traj = default_orbit(20);
        let k = Intrinsics::new(20.0, 20.0, 16.0, 12.0, 32, 24).unwrap();
        let cfg = DriftConfig::desk_default(7, 20);
        let bytes = || {
            let run = simulate_stream(&Scene::default_room(), &traj, &cfg, &k).unwrap();
            let mut buf = Vec::new();
            run.stream.write_jsonl(&mut buf).unwrap();
            for d in &run.depths {
                d.write_to(&mut buf).unwrap();
            }
            buf
        };
        assert_eq!(bytes(), bytes());
    }

    #[test]
    fn trajectory_roundtrip() {
        let traj = default_orbit(5);
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        assert!(std::str::from_utf8(&buf).unwrap().starts_with("{\"t\":0,\"pose\":["));
        assert_eq!(read_trajectory(&buf[..]).unwrap(), traj);
        assert!(read_trajectory(&b"{\"t\":1,\"pose\":[1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1]}\n"[..]).is_err());
    }

    #[test]
    fn rendered_depth_lies_on_surface() {
        let k = Intrinsics::new(40.0, 40.0, 32.0, 24.0, 64, 48).unwrap();
        let scene = Scene::default_room();
        let pose = default_orbit(8)[3];
        let depth = render_depth(&scene, &pose, &k);
        assert!(depth.valid_count() > 64 * 48 / 2);
        for row in 0..48 {
            for col in 0..64 {
                if let Some(z) = depth.get(col, row) {
                    let p = pose.transform_point(&k.backproject(col as f64, row as f64, z as f64));
                    assert!(scene.sdf(&p).abs() <= 2e-3);
                }
            }
        }
    }
}
