//! Dense voxel lattice shared by the TSDF and feature volumes.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pose, Projection};

/// Per-observation contributions are rounded to multiples of this value.
///
/// Every accumulator then holds an exact dyadic rational, so f64 addition is
/// exact and associative for up to ~2^29 summed magnitude: removing a
/// contribution is a bitwise inverse of adding it, in any order.
pub const QUANTUM: f64 = 1.0 / (1u64 << 24) as f64;

#[inline]
pub fn quantize(x: f64) -> f64 {
    (x * (1u64 << 24) as f64).round() * QUANTUM
}

/// Whether an observation is being added to or removed from a volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Integrate,
    Deintegrate,
}

impl Sign {
    #[inline]
    pub fn factor(self) -> f64 {
        match self {
            Sign::Integrate => 1.0,
            Sign::Deintegrate => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Integrate => Sign::Deintegrate,
            Sign::Deintegrate => Sign::Integrate,
        }
    }
}

/// De-integration may not push a weight below this.
pub const NEGATIVE_WEIGHT_TOLERANCE: f64 = -1e-6;

/// Voxel `(i, j, k)` sits at `origin + voxel_size * (i, j, k)`; storage is x-fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelGrid {
    origin: Vector3<f64>,
    voxel_size: f64,
    dims: [usize; 3],
}

impl VoxelGrid {
    pub fn new(origin: Vector3<f64>, voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::InvalidInput(format!("voxel size {voxel_size} must be positive")));
        }
        if dims.contains(&0) || !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid grid dims {dims:?} / origin")));
        }
        Ok(Self { origin, voxel_size, dims })
    }

    /// Smallest grid with lattice points covering `[min, max]`.
    pub fn from_bounds(min: Vector3<f64>, max: Vector3<f64>, voxel_size: f64) -> Result<Self> {
        if (0..3).any(|a| !(max[a] > min[a])) {
            return Err(Error::InvalidInput(format!("empty bounds {min:?}..{max:?}")));
        }
        let dims = [0, 1, 2].map(|a| ((max[a] - min[a]) / voxel_size - 1e-9).ceil() as usize + 1);
        Self::new(min, voxel_size, dims)
    }

    pub fn origin(&self) -> &Vector3<f64> {
        &self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn slab_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin + Vector3::new(i as f64, j as f64, k as f64) * self.voxel_size
    }
}

/// A posed camera, precomputed for voxel sweeps.
pub(crate) struct CameraView<'a> {
    rot: Matrix3<f64>,
    trans: Vector3<f64>,
    k: &'a Intrinsics,
}

impl<'a> CameraView<'a> {
    /// `cam_pose` is world-from-camera.
    pub fn new(cam_pose: &Pose, k: &'a Intrinsics) -> Self {
        let cam_from_world = cam_pose.inverse();
        Self { rot: *cam_from_world.rotation(), trans: *cam_from_world.translation(), k }
    }

    /// Calls `f(offset_in_slab, projection)` for every voxel of z-slab `k`
    /// that lands in the image with positive depth.
    #[inline]
    pub fn visit_slab(&self, grid: &VoxelGrid, k: usize, mut f: impl FnMut(usize, Projection)) {
        let [nx, ny, _] = grid.dims;
        let step = self.rot.column(0) * grid.voxel_size;
        for j in 0..ny {
            let row_origin = grid.position(0, j, k);
            let base = self.rot * row_origin + self.trans;
            for i in 0..nx {
                let p = base + step * i as f64;
                if let Some(proj) = self.k.project_camera(&p) {
                    f(i + nx * j, proj);
                }
            }
        }
    }
}
