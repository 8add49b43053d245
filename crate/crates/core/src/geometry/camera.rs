use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Pose;
use crate::error::{Error, Result};

/// Pinhole intrinsics. Pixel `(i, j)` is centered at `u = i`, `v = j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// A point projected into the image plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl Projection {
    /// Index of the nearest pixel, row-major.
    pub fn pixel_index(&self, width: usize) -> usize {
        let col = (self.u + 0.5).floor() as usize;
        let row = (self.v + 0.5).floor() as usize;
        row * width + col
    }
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// The 320×240 desk-scale camera used by the simulator defaults.
    pub fn desk_default() -> Self {
        Self { fx: 277.0, fy: 277.0, cx: 160.0, cy: 120.0, width: 320, height: 240 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid intrinsics {self:?}")))
        }
    }

    /// Projects a camera-frame point. Out of view when `z <= 0` or the nearest
    /// pixel falls outside the image.
    #[inline]
    pub fn project_camera(&self, p: &Vector3<f64>) -> Option<Projection> {
        let z = p[2];
        if !(z > 0.0) {
            return None;
        }
        let u = self.fx * p[0] / z + self.cx;
        let v = self.fy * p[1] / z + self.cy;
        let in_view = u >= -0.5 && u < self.width as f64 - 0.5 && v >= -0.5 && v < self.height as f64 - 0.5;
        in_view.then_some(Projection { u, v, z })
    }

    /// Camera-frame point at z-depth `z` behind image coordinates `(u, v)`.
    pub fn backproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Unnormalized viewing ray through `(u, v)` with unit z component.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Pinhole projection of a world point given a camera-from-world transform.
pub fn project(point_world: &Vector3<f64>, cam_from_world: &Pose, k: &Intrinsics) -> Option<Projection> {
    k.project_camera(&cam_from_world.transform_point(point_world))
}
