use nalgebra::{Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::posefilter::{PoseEvent, PoseStream, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopClosure {
    pub trigger_time: Tick,
    /// How far each past estimate moves toward ground truth, in [0, 1].
    pub correction_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub seed: u64,
    /// Translation random-walk step, meters per axis per tick (standard deviation).
    pub sigma_t: f64,
    /// Rotation random-walk step magnitude, degrees per tick (standard deviation).
    pub sigma_r: f64,
    pub loop_closures: Vec<LoopClosure>,
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        let sigmas_ok =
            self.sigma_t >= 0.0 && self.sigma_r >= 0.0 && self.sigma_t.is_finite() && self.sigma_r.is_finite();
        let fractions_ok = self.loop_closures.iter().all(|lc| (0.0..=1.0).contains(&lc.correction_fraction));
        if sigmas_ok && fractions_ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid drift config {self:?}")))
        }
    }
}

/// Moves `estimate` toward `truth` by `fraction`: rotation along the geodesic,
/// translation along the straight line. Both errors shrink by `1 - fraction`.
pub fn correct_toward(estimate: &Pose, truth: &Pose, fraction: f64) -> Pose {
    if fraction >= 1.0 {
        return *truth;
    }
    let correcting = truth.rotation() * estimate.rotation().transpose();
    let partial = Rotation3::from_matrix_unchecked(correcting).powf(fraction);
    let rotation = partial.matrix() * estimate.rotation();
    let translation = estimate.translation() + (truth.translation() - estimate.translation()) * fraction;
    Pose::new(rotation, translation).expect("product of rotations stays orthonormal")
}

fn random_step(rng: &mut ChaCha8Rng, sigma_t: f64, sigma_r: f64) -> Pose {
    let tn = Normal::new(0.0, sigma_t).expect("sigma_t validated");
    let rn = Normal::new(0.0, sigma_r).expect("sigma_r validated");
    let t = Vector3::new(tn.sample(rng), tn.sample(rng), tn.sample(rng));
    let axis = Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
    let degrees: f64 = rn.sample(rng);
    Pose::from_translation(t[0], t[1], t[2]).compose(&Pose::from_axis_angle(&axis, degrees))
}

/// Emits frame `t` at tick `t` with estimate `drift(t) ∘ truth(t)`, where the
/// drift is a seeded SE(3) random walk. At each loop-closure trigger every
/// frame seen so far receives an update moving it toward ground truth, and
/// the running drift is corrected by the same fraction.
pub fn simulate_poses(trajectory: &[Pose], cfg: &DriftConfig) -> Result<PoseStream> {
    cfg.validate()?;
    if trajectory.is_empty() {
        return Err(Error::InvalidInput("trajectory is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drift = Pose::identity();
    let mut estimates: Vec<Pose> = Vec::with_capacity(trajectory.len());
    let mut events = Vec::new();
    for (t, truth) in trajectory.iter().enumerate() {
        let tick = t as Tick;
        drift = random_step(&mut rng, cfg.sigma_t, cfg.sigma_r).compose(&drift);
        let estimate = drift.compose(truth);
        estimates.push(estimate);
        events.push(PoseEvent::new_frame(tick, tick, estimate));

        for lc in cfg.loop_closures.iter().filter(|lc| lc.trigger_time == tick) {
            for (f, est) in estimates.iter_mut().enumerate() {
                let corrected = correct_toward(est, &trajectory[f], lc.correction_fraction);
                // Only revisions are reported; an unchanged estimate is not an update.
                if corrected != *est {
                    *est = corrected;
                    events.push(PoseEvent::update(tick, f as u64, corrected));
                }
            }
            drift = correct_toward(&drift, &Pose::identity(), lc.correction_fraction);
        }
    }
    PoseStream::new(events)
}
