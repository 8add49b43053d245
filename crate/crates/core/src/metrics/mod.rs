//! Time-dependent ground truth and sampled mesh-comparison metrics.

mod evaluate;
mod groundtruth;
mod nn;
mod sampling;

pub use evaluate::{
    evaluate, evaluate_samples, evaluate_with_seeds, EvalConfig, MetricsReport, CLIP_DISTANCE,
    DEFAULT_INLIER_THRESHOLD, DEFAULT_SAMPLE_COUNT,
};
pub use groundtruth::{fuse_from_scratch, ground_truth_at, poses_at, FusionSetup, GroundTruth};
pub use nn::KdTree;
pub use sampling::point_sample;
