//! Shared fixtures for the benchmarks: the desk camera looking into the
//! default room, and a volume fused from part of the default orbit.

use posefuse_core::grid::Sign;
use posefuse_core::simulator::{default_orbit, render_depth};
use posefuse_core::{DepthImage, ExperimentConfig, Intrinsics, Pose, Scene, TriangleMesh, TsdfVolume};

pub struct Fixture {
    pub config: ExperimentConfig,
    pub camera: Intrinsics,
    pub views: Vec<(DepthImage, Pose)>,
}

impl Fixture {
    /// `n` views spread evenly over one revolution of the default orbit.
    pub fn desk(n: usize) -> Self {
        let scene = Scene::default_room();
        let camera = Intrinsics::desk_default();
        let views = default_orbit(n).into_iter().map(|p| (render_depth(&scene, &p, &camera), p)).collect();
        Self { config: ExperimentConfig::default(), camera, views }
    }

    pub fn empty_volume(&self) -> TsdfVolume {
        TsdfVolume::new(self.config.grid().expect("default grid is valid"), self.config.truncation())
            .expect("valid truncation")
    }

    pub fn fused(&self) -> TsdfVolume {
        let mut vol = self.empty_volume();
        for (d, p) in &self.views {
            vol.integrate(d, p, &self.camera, Sign::Integrate).expect("integration of rendered views");
        }
        vol
    }

    pub fn mesh(&self) -> TriangleMesh {
        self.fused().extract_mesh()
    }
}
