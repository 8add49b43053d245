use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Intrinsics;
use crate::grid::VoxelGrid;
use crate::metrics::{EvalConfig, FusionSetup, DEFAULT_INLIER_THRESHOLD, DEFAULT_SAMPLE_COUNT};
use crate::posefilter::FilterConfig;
use crate::simulator::Scene;

/// Every tunable of a reconstruction experiment. Serialized into run metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Meters.
    pub voxel_size: f64,
    /// Truncation distance in voxels.
    pub truncation_voxels: u32,
    /// Keyframes per bundle.
    pub bundle_size: usize,
    /// Summed per-bundle displacement that triggers an update, meters.
    pub update_threshold: f64,
    /// Meters.
    pub keyframe_translation: f64,
    /// Degrees.
    pub keyframe_rotation: f64,
    /// Meters.
    pub inlier_threshold: f64,
    pub samples: usize,
    pub seed: u64,
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let (lo, hi) = Scene::default_room_bounds();
        Self {
            voxel_size: 0.04,
            truncation_voxels: 3,
            bundle_size: 9,
            update_threshold: 0.45,
            keyframe_translation: 0.10,
            keyframe_rotation: 15.0,
            inlier_threshold: DEFAULT_INLIER_THRESHOLD,
            samples: DEFAULT_SAMPLE_COUNT,
            seed: 7,
            bounds_min: lo.into(),
            bounds_max: hi.into(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.voxel_size,
            self.update_threshold,
            self.keyframe_translation,
            self.keyframe_rotation,
            self.inlier_threshold,
        ];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite())
            || self.truncation_voxels == 0
            || self.bundle_size == 0
            || self.samples == 0
        {
            return Err(Error::InvalidInput(format!("config values must be positive: {self:?}")));
        }
        if !(0..3).all(|a| self.bounds_min[a] < self.bounds_max[a]) {
            return Err(Error::InvalidInput("bounds_min must be below bounds_max on every axis".into()));
        }
        Ok(())
    }

    pub fn truncation(&self) -> f64 {
        self.truncation_voxels as f64 * self.voxel_size
    }

    pub fn grid(&self) -> Result<VoxelGrid> {
        VoxelGrid::from_bounds(Vector3::from(self.bounds_min), Vector3::from(self.bounds_max), self.voxel_size)
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            keyframe_translation: self.keyframe_translation,
            keyframe_rotation: self.keyframe_rotation,
            bundle_size: self.bundle_size,
            update_threshold: self.update_threshold,
        }
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig { samples: self.samples, inlier_threshold: self.inlier_threshold, seed: self.seed }
    }

    pub fn fusion(&self, intrinsics: Intrinsics) -> Result<FusionSetup> {
        Ok(FusionSetup { grid: self.grid()?, truncation: self.truncation(), intrinsics })
    }
}
