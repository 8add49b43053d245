//! Online volumetric reconstruction from depth streams whose camera poses keep
//! changing after the fact.
//!
//! Bundles of keyframes are fused into a TSDF or feature volume. When SLAM
//! revises the poses of an already-fused bundle, its old contribution is
//! removed exactly and the bundle is fused again at the new poses.

// Negated comparisons are how validation rejects NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod featvol;
pub mod geometry;
pub mod grid;
mod mc_tables;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod posefilter;
pub mod simulator;
pub mod store;
pub mod tsdf;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use featvol::{extract_features, FeatureMap, FeatureMode, FeatureVolume, Sampler};
pub use geometry::{DepthImage, Intrinsics, Pose};
pub use grid::{Sign, VoxelGrid};
pub use mesh::TriangleMesh;
pub use metrics::{evaluate, EvalConfig, FusionSetup, GroundTruth, MetricsReport};
pub use pipeline::{reconstruct, run_experiment, EvalScope, Representation, Strategy, Volume};
pub use posefilter::{plan_actions, FilterConfig, PoseEvent, PoseStream, ReconAction};
pub use simulator::{DriftConfig, Scene};
pub use store::DepthStore;
pub use tsdf::TsdfVolume;
