use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nn::KdTree;
use super::sampling::point_sample;
use crate::mesh::TriangleMesh;

/// Distance assigned to a sample with no counterpart, meters.
pub const CLIP_DISTANCE: f64 = 1.0;
pub const DEFAULT_SAMPLE_COUNT: usize = 200_000;
pub const DEFAULT_INLIER_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub samples: usize,
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { samples: DEFAULT_SAMPLE_COUNT, inlier_threshold: DEFAULT_INLIER_THRESHOLD, seed: 0 }
    }
}

impl EvalConfig {
    /// Sampling seeds for the predicted and reference meshes; always distinct.
    pub fn sample_seeds(&self) -> (u64, u64) {
        let pred = self.seed.wrapping_mul(2);
        (pred, pred.wrapping_add(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub completeness: f64,
    pub chamfer: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

impl MetricsReport {
    fn from_parts(accuracy: f64, completeness: f64, precision: f64, recall: f64) -> Self {
        let fscore = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { accuracy, completeness, chamfer: (accuracy + completeness) / 2.0, precision, recall, fscore }
    }
}

struct Directed {
    mean: f64,
    inlier_fraction: f64,
}

/// Distances from every point of `from` to its nearest point in `to`.
fn directed(from: &[Vector3<f64>], to: &KdTree, threshold: f64) -> Directed {
    if from.is_empty() {
        return Directed { mean: CLIP_DISTANCE, inlier_fraction: 0.0 };
    }
    let dists: Vec<f64> = from.par_iter().map(|p| to.nearest_distance(p, CLIP_DISTANCE)).collect();
    let sum: f64 = dists.iter().sum();
    let inliers = dists.iter().filter(|&&d| d < threshold).count();
    Directed { mean: sum / dists.len() as f64, inlier_fraction: inliers as f64 / dists.len() as f64 }
}

/// Point-to-point metrics between predicted samples `p` and reference samples `g`.
pub fn evaluate_samples(p: &[Vector3<f64>], g: &[Vector3<f64>], threshold: f64) -> MetricsReport {
    let acc = directed(p, &KdTree::new(g), threshold);
    let comp = directed(g, &KdTree::new(p), threshold);
    MetricsReport::from_parts(acc.mean, comp.mean, acc.inlier_fraction, comp.inlier_fraction)
}

/// Samples both meshes with the seeds from [`EvalConfig::sample_seeds`] and
/// compares them. Returns `None` when `gt` is empty; an empty `pred` scores worst case.
pub fn evaluate(pred: &TriangleMesh, gt: &TriangleMesh, cfg: &EvalConfig) -> Option<MetricsReport> {
    evaluate_with_seeds(pred, gt, cfg, cfg.sample_seeds())
}

/// [`evaluate`] with explicit `(pred, gt)` sampling seeds.
pub fn evaluate_with_seeds(
    pred: &TriangleMesh,
    gt: &TriangleMesh,
    cfg: &EvalConfig,
    (pred_seed, gt_seed): (u64, u64),
) -> Option<MetricsReport> {
    let g = point_sample(gt, cfg.samples, gt_seed);
    if g.is_empty() {
        return None;
    }
    let p = point_sample(pred, cfg.samples, pred_seed);
    Some(evaluate_samples(&p, &g, cfg.inlier_threshold))
}
