//! Truncated signed distance volume with paired integrate / de-integrate operators.

use std::io::{Read, Write};

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{DepthImage, Intrinsics, Pose};
use crate::grid::{quantize, CameraView, Sign, VoxelGrid, NEGATIVE_WEIGHT_TOLERANCE};
use crate::mesh::{marching_cubes, TriangleMesh};

const TSDF_MAGIC: &[u8; 4] = b"TSD1";

/// Dense TSDF storing `(weighted_sum, weight_sum)` per voxel.
///
/// Each observation adds a quantized sample with weight exactly 1, so a
/// de-integration with the same arguments subtracts exactly what was added.
#[derive(Clone, Debug, PartialEq)]
pub struct TsdfVolume {
    grid: VoxelGrid,
    truncation: f64,
    weighted_sum: Vec<f64>,
    weight_sum: Vec<f64>,
}

impl TsdfVolume {
    pub fn new(grid: VoxelGrid, truncation: f64) -> Result<Self> {
        if !(truncation > 0.0 && truncation.is_finite()) {
            return Err(Error::InvalidInput(format!("truncation {truncation} must be positive")));
        }
        let n = grid.len();
        Ok(Self { grid, truncation, weighted_sum: vec![0.0; n], weight_sum: vec![0.0; n] })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn weighted_sums(&self) -> &[f64] {
        &self.weighted_sum
    }

    pub fn weight_sums(&self) -> &[f64] {
        &self.weight_sum
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weight_sum[index]
    }

    /// Exposed TSDF in [-1, 1], or `None` where nothing is integrated.
    #[inline]
    pub fn tsdf(&self, index: usize) -> Option<f64> {
        let w = self.weight_sum[index];
        (w > 0.0).then(|| self.weighted_sum[index] / w)
    }

    pub fn total_weight(&self) -> f64 {
        self.weight_sum.iter().sum()
    }

    /// Bitwise state equality (used by exact-inverse checks).
    pub fn bitwise_eq(&self, other: &TsdfVolume) -> bool {
        let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        self.grid == other.grid
            && self.weighted_sum.len() == other.weighted_sum.len()
            && same(&self.weighted_sum, &other.weighted_sum)
            && same(&self.weight_sum, &other.weight_sum)
    }

    /// Fuses (or removes) one depth map taken from `cam_pose` (world-from-camera).
    ///
    /// A voxel is updated when it projects onto a valid pixel and its signed
    /// distance along the ray, `depth - z`, exceeds `-truncation`. A
    /// de-integration that would leave any weight negative is rolled back and
    /// reported with the first offending voxel.
    pub fn integrate(&mut self, depth: &DepthImage, cam_pose: &Pose, k: &Intrinsics, sign: Sign) -> Result<()> {
        if depth.width() != k.width || depth.height() != k.height {
            return Err(Error::InvalidInput(format!(
                "depth image {}×{} does not match intrinsics {}×{}",
                depth.width(),
                depth.height(),
                k.width,
                k.height
            )));
        }
        let offending = self.apply(depth, cam_pose, k, sign);
        if let Some(index) = offending {
            let weight = self.weight_sum[index];
            self.apply(depth, cam_pose, k, sign.flipped());
            return Err(Error::Protocol { voxel: self.grid.coords(index), weight });
        }
        Ok(())
    }

    fn apply(&mut self, depth: &DepthImage, cam_pose: &Pose, k: &Intrinsics, sign: Sign) -> Option<usize> {
        let view = CameraView::new(cam_pose, k);
        let grid = self.grid;
        let trunc = self.truncation;
        let s = sign.factor();
        let slab = grid.slab_len();
        let width = depth.width();
        self.weighted_sum
            .par_chunks_mut(slab)
            .zip(self.weight_sum.par_chunks_mut(slab))
            .enumerate()
            .filter_map(|(z, (sums, weights))| {
                let mut offending = None;
                view.visit_slab(&grid, z, |i, proj| {
                    let Some(d) = depth.valid_at(proj.pixel_index(width)) else {
                        return;
                    };
                    let sdf = d as f64 - proj.z;
                    if sdf <= -trunc {
                        return;
                    }
                    let sample = quantize((sdf / trunc).clamp(-1.0, 1.0));
                    sums[i] += s * sample;
                    weights[i] += s;
                    if weights[i] < NEGATIVE_WEIGHT_TOLERANCE && offending.is_none() {
                        offending = Some(z * slab + i);
                    }
                });
                offending
            })
            .min()
    }

    /// Marching-cubes surface at TSDF = 0; cells with an unobserved corner are skipped.
    pub fn extract_mesh(&self) -> TriangleMesh {
        marching_cubes(&self.grid, |i| self.tsdf(i))
    }

    /// TSD1 debug snapshot. Accumulators are narrowed to f32.
    pub fn write_snapshot(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(TSDF_MAGIC)?;
        write_grid_header(&mut w, &self.grid)?;
        let mut buf = Vec::with_capacity(self.grid.len() * 8);
        for (s, wt) in self.weighted_sum.iter().zip(&self.weight_sum) {
            buf.extend_from_slice(&(*s as f32).to_le_bytes());
            buf.extend_from_slice(&(*wt as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Reads a TSD1 snapshot. Truncation is not stored; pass the one used to build it.
    pub fn read_snapshot(mut r: impl Read, truncation: f64) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated TSD1 header".into()))?;
        if &magic != TSDF_MAGIC {
            return Err(Error::Format("missing TSD1 magic".into()));
        }
        let grid = read_grid_header(&mut r)?;
        let mut vol = Self::new(grid, truncation)?;
        let mut bytes = vec![0u8; grid.len() * 8];
        r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated TSD1 payload".into()))?;
        for (i, c) in bytes.chunks_exact(8).enumerate() {
            vol.weighted_sum[i] = f32::from_le_bytes(c[..4].try_into().unwrap()) as f64;
            vol.weight_sum[i] = f32::from_le_bytes(c[4..].try_into().unwrap()) as f64;
        }
        Ok(vol)
    }
}

pub(crate) fn write_grid_header(w: &mut impl Write, grid: &VoxelGrid) -> std::io::Result<()> {
    for d in grid.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for o in grid.origin().iter() {
        w.write_all(&(*o as f32).to_le_bytes())?;
    }
    w.write_all(&(grid.voxel_size() as f32).to_le_bytes())
}

pub(crate) fn read_grid_header(r: &mut impl Read) -> Result<VoxelGrid> {
    let mut b = [0u8; 28];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated volume header".into()))?;
    let u = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as usize;
    let f = |o: usize| f32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as f64;
    VoxelGrid::new(Vector3::new(f(12), f(16), f(20)), f(24), [u(0), u(4), u(8)])
}
