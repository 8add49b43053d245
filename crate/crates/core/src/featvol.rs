//! Running-average feature volume with exact linear de-integration.
//!
//! Per-view feature maps are densely back-projected: every voxel in the
//! camera frustum takes the feature of the pixel it projects to, and the
//! volume keeps `(feature_sum, count)` so that removing a view is a
//! subtraction.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{DepthImage, Intrinsics, Pose};
use crate::grid::{quantize, CameraView, Sign, VoxelGrid, NEGATIVE_WEIGHT_TOLERANCE};
use crate::mesh::{marching_cubes, TriangleMesh};
use crate::tsdf::{read_grid_header, write_grid_header};

const FEATURE_MAGIC: &[u8; 4] = b"FVL1";

/// Row-major per-pixel feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || data.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "feature data has {} values, expected {width}×{height}×{channels}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }
}

/// Synthetic stand-ins for a learned image encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureMode {
    /// One channel carrying the depth value (0 where invalid).
    IdentityDepth,
    /// `channels` pseudo-random values in [-1, 1) keyed by (frame id, pixel, channel).
    Hashed { channels: usize },
}

pub fn extract_features(depth: &DepthImage, mode: FeatureMode, frame_id: u64) -> FeatureMap {
    let (w, h) = (depth.width(), depth.height());
    match mode {
        FeatureMode::IdentityDepth => {
            let data = (0..w * h).map(|i| depth.valid_at(i).unwrap_or(0.0)).collect();
            FeatureMap { width: w, height: h, channels: 1, data }
        }
        FeatureMode::Hashed { channels } => {
            let channels = channels.max(1);
            let mut data = Vec::with_capacity(w * h * channels);
            for pixel in 0..(w * h) as u64 {
                for c in 0..channels as u64 {
                    let bits = splitmix64(frame_id ^ splitmix64(pixel ^ splitmix64(c)));
                    // top 24 bits -> [-1, 1)
                    data.push(((bits >> 40) as f32) / (1u32 << 23) as f32 - 1.0);
                }
            }
            FeatureMap { width: w, height: h, channels, data }
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// How a back-projected pixel feature becomes a voxel contribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampler {
    /// Every voxel in the frustum receives the raw feature.
    Dense,
    /// Single-channel depth features decoded to a truncated SDF sample,
    /// `clamp((f - z) / truncation, -1, 1)`, skipping invalid depth and
    /// voxels further than `truncation` behind the surface.
    TruncatedDepth { truncation: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVolume {
    grid: VoxelGrid,
    channels: usize,
    feature_sum: Vec<f64>,
    count: Vec<f64>,
}

impl FeatureVolume {
    pub fn new(grid: VoxelGrid, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidInput("feature volume needs at least one channel".into()));
        }
        Ok(Self { grid, channels, feature_sum: vec![0.0; grid.len() * channels], count: vec![0.0; grid.len()] })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn count(&self, index: usize) -> f64 {
        self.count[index]
    }

    pub fn feature_sums(&self) -> &[f64] {
        &self.feature_sum
    }

    pub fn counts(&self) -> &[f64] {
        &self.count
    }

    /// Running-average feature at a voxel, `None` where the count is zero.
    pub fn feature(&self, index: usize) -> Option<Vec<f64>> {
        let n = self.count[index];
        (n > 0.0).then(|| {
            self.feature_sum[index * self.channels..(index + 1) * self.channels].iter().map(|s| s / n).collect()
        })
    }

    #[inline]
    pub fn channel(&self, index: usize, channel: usize) -> Option<f64> {
        let n = self.count[index];
        (n > 0.0).then(|| self.feature_sum[index * self.channels + channel] / n)
    }

    pub fn bitwise_eq(&self, other: &FeatureVolume) -> bool {
        let same =
            |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        self.grid == other.grid
            && self.channels == other.channels
            && same(&self.feature_sum, &other.feature_sum)
            && same(&self.count, &other.count)
    }

    /// Adds (or removes) one view's features via nearest-pixel back-projection.
    pub fn integrate(
        &mut self,
        features: &FeatureMap,
        cam_pose: &Pose,
        k: &Intrinsics,
        sign: Sign,
        sampler: Sampler,
    ) -> Result<()> {
        if features.width() != k.width || features.height() != k.height {
            return Err(Error::InvalidInput(format!(
                "feature map {}×{} does not match intrinsics {}×{}",
                features.width(),
                features.height(),
                k.width,
                k.height
            )));
        }
        if features.channels() != self.channels {
            return Err(Error::InvalidInput(format!(
                "feature map has {} channels, volume has {}",
                features.channels(),
                self.channels
            )));
        }
        if matches!(sampler, Sampler::TruncatedDepth { .. }) && self.channels != 1 {
            return Err(Error::InvalidInput("truncated-depth sampling needs one channel".into()));
        }
        if let Some(index) = self.apply(features, cam_pose, k, sign, sampler) {
            let weight = self.count[index];
            self.apply(features, cam_pose, k, sign.flipped(), sampler);
            return Err(Error::Protocol { voxel: self.grid.coords(index), weight });
        }
        Ok(())
    }

    fn apply(
        &mut self,
        features: &FeatureMap,
        cam_pose: &Pose,
        k: &Intrinsics,
        sign: Sign,
        sampler: Sampler,
    ) -> Option<usize> {
        let view = CameraView::new(cam_pose, k);
        let grid = self.grid;
        let channels = self.channels;
        let s = sign.factor();
        let slab = grid.slab_len();
        let width = features.width();
        self.feature_sum
            .par_chunks_mut(slab * channels)
            .zip(self.count.par_chunks_mut(slab))
            .enumerate()
            .filter_map(|(z, (sums, counts))| {
                let mut offending = None;
                view.visit_slab(&grid, z, |i, proj| {
                    let f = features.pixel(proj.pixel_index(width));
                    match sampler {
                        Sampler::Dense => {
                            for (acc, v) in sums[i * channels..(i + 1) * channels].iter_mut().zip(f) {
                                *acc += s * quantize(*v as f64);
                            }
                        }
                        Sampler::TruncatedDepth { truncation } => {
                            let d = f[0];
                            if !(d > 0.0 && d.is_finite()) {
                                return;
                            }
                            let sdf = d as f64 - proj.z;
                            if sdf <= -truncation {
                                return;
                            }
                            sums[i] += s * quantize((sdf / truncation).clamp(-1.0, 1.0));
                        }
                    }
                    counts[i] += s;
                    if counts[i] < NEGATIVE_WEIGHT_TOLERANCE && offending.is_none() {
                        offending = Some(z * slab + i);
                    }
                });
                offending
            })
            .min()
    }

    /// Zero isosurface of one channel, treated as a signed distance.
    pub fn extract_mesh(&self, channel: usize) -> TriangleMesh {
        marching_cubes(&self.grid, |i| self.channel(i, channel))
    }

    /// FVL1 debug snapshot: TSD1-style header, channel count, then per voxel
    /// the feature sums followed by the count, all f32.
    pub fn write_snapshot(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        write_grid_header(&mut w, &self.grid)?;
        w.write_all(&(self.channels as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.count.len() * (self.channels + 1) * 4);
        for (v, n) in self.count.iter().enumerate() {
            for s in &self.feature_sum[v * self.channels..(v + 1) * self.channels] {
                buf.extend_from_slice(&(*s as f32).to_le_bytes());
            }
            buf.extend_from_slice(&(*n as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_snapshot(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated FVL1 header".into()))?;
        if &magic != FEATURE_MAGIC {
            return Err(Error::Format("missing FVL1 magic".into()));
        }
        let grid = read_grid_header(&mut r)?;
        let mut c = [0u8; 4];
        r.read_exact(&mut c).map_err(|_| Error::Format("truncated FVL1 header".into()))?;
        let channels = u32::from_le_bytes(c) as usize;
        let mut vol = Self::new(grid, channels)?;
        let mut bytes = vec![0u8; grid.len() * (channels + 1) * 4];
        r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated FVL1 payload".into()))?;
        let mut values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        for v in 0..grid.len() {
            for ch in 0..channels {
                vol.feature_sum[v * channels + ch] = values.next().unwrap();
            }
            vol.count[v] = values.next().unwrap();
        }
        Ok(vol)
    }
}
