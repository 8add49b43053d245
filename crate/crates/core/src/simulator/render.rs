use rayon::prelude::*;

use super::Scene;
use crate::geometry::{DepthImage, Intrinsics, Pose};

/// A hit needs the SDF below this, meters.
pub const HIT_EPSILON: f64 = 1e-4;
pub const MAX_STEPS: usize = 256;
pub const MAX_RANGE: f64 = 10.0;

/// Sphere-traces every pixel center on the unsigned distance and returns z-depth; misses, rays beyond
/// [`MAX_RANGE`] and rays that do not converge within [`MAX_STEPS`] are invalid (0).
pub fn render_depth(scene: &Scene, cam_pose: &Pose, k: &Intrinsics) -> DepthImage {
    let mut data = vec![0.0f32; k.width * k.height];
    data.par_chunks_mut(k.width).enumerate().for_each(|(row, out)| {
        for (col, px) in out.iter_mut().enumerate() {
            *px = trace_pixel(scene, cam_pose, k, col as f64, row as f64).unwrap_or(0.0) as f32;
        }
    });
    DepthImage::new(k.width, k.height, data).expect("sized from intrinsics")
}

fn trace_pixel(scene: &Scene, cam_pose: &Pose, k: &Intrinsics, u: f64, v: f64) -> Option<f64> {
    let ray = k.ray(u, v);
    let ray_len = ray.norm();
    let dir = cam_pose.rotation() * (ray / ray_len);
    let origin = cam_pose.translation();
    let mut s = 0.0;
    for _ in 0..MAX_STEPS {
        let d = scene.sdf(&(origin + dir * s)).abs();
        if d < HIT_EPSILON {
            return Some(s / ray_len);
        }
        s += d;
        if s > MAX_RANGE {
            return None;
        }
    }
    None
}
