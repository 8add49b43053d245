use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on `R^T R = I` and `det R = 1` for poses built in memory.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Looser tolerance accepted when reading poses from text files. Inputs between
/// the two tolerances are projected back onto SO(3).
pub const FILE_ORTHONORMAL_TOLERANCE: f64 = 1e-6;

/// Rigid transform in SE(3). Camera poses are world-from-camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Validating constructor.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let err = orthonormality_error(&rotation);
        if !(err <= ORTHONORMAL_TOLERANCE) {
            return Err(Error::InvalidPose(format!("rotation deviates from SO(3) by {err:e}")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::new(x, y, z) }
    }

    /// Rotation of `degrees` about `axis` (need not be normalized), no translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, degrees: f64) -> Self {
        let rotation = if axis.norm() == 0.0 || degrees == 0.0 {
            Matrix3::identity()
        } else {
            *Rotation3::from_axis_angle(&Unit::new_normalize(*axis), degrees.to_radians()).matrix()
        };
        Self { rotation, translation: Vector3::zeros() }
    }

    pub fn rot_x(degrees: f64) -> Self {
        Self::from_axis_angle(&Vector3::x(), degrees)
    }

    pub fn rot_y(degrees: f64) -> Self {
        Self::from_axis_angle(&Vector3::y(), degrees)
    }

    pub fn rot_z(degrees: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), degrees)
    }

    /// Camera at `eye` looking at `target`. Camera axes: +z forward, +x right, +y down.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, world_up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::InvalidPose("look_at with eye == target".into()));
        }
        let forward = forward.normalize();
        let right = forward.cross(&world_up);
        if right.norm() < 1e-12 {
            return Err(Error::InvalidPose("look_at direction parallel to up".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::new(rotation, eye)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self ∘ other`: maps x to self(other(x)).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Euclidean distance between the two translations, in meters.
    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Geodesic angle of the relative rotation, in degrees within [0, 180].
    ///
    /// Symmetric bit-for-bit: every product and sum is formed in the same
    /// order regardless of argument order.
    pub fn rotation_angle(&self, other: &Pose) -> f64 {
        let a = &self.rotation;
        let b = &other.rotation;
        // m = a^T b, written out so that swapping a and b yields m^T exactly.
        let m = |i: usize, j: usize| a[(0, i)] * b[(0, j)] + a[(1, i)] * b[(1, j)] + a[(2, i)] * b[(2, j)];
        let trace = m(0, 0) + m(1, 1) + m(2, 2);
        let sx = m(2, 1) - m(1, 2);
        let sy = m(0, 2) - m(2, 0);
        let sz = m(1, 0) - m(0, 1);
        let sin2 = (sx * sx + sy * sy + sz * sz).sqrt();
        sin2.atan2(trace - 1.0).to_degrees()
    }

    /// Row-major homogeneous 4×4 matrix.
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t[0],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t[1],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t[2],
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    /// Parses a row-major homogeneous matrix as found in pose files.
    ///
    /// Rotations within [`ORTHONORMAL_TOLERANCE`] are kept bit-exact; those within
    /// [`FILE_ORTHONORMAL_TOLERANCE`] are projected onto the nearest rotation.
    pub fn from_row_major(m: &[f64]) -> Result<Self> {
        if m.len() != 16 {
            return Err(Error::InvalidPose(format!("expected 16 values, got {}", m.len())));
        }
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("non-finite matrix entry".into()));
        }
        let bottom = [m[12], m[13], m[14], m[15]];
        if bottom.iter().zip([0.0, 0.0, 0.0, 1.0]).any(|(a, b)| (a - b).abs() > FILE_ORTHONORMAL_TOLERANCE) {
            return Err(Error::InvalidPose(format!("bottom row {bottom:?} is not [0 0 0 1]")));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        let err = orthonormality_error(&rotation);
        if err <= ORTHONORMAL_TOLERANCE {
            Ok(Self { rotation, translation })
        } else if err <= FILE_ORTHONORMAL_TOLERANCE {
            Ok(Self { rotation: nearest_rotation(&rotation), translation })
        } else {
            Err(Error::InvalidPose(format!("rotation deviates from SO(3) by {err:e}")))
        }
    }
}

/// Max of the elementwise deviation of `R^T R` from identity and `|det R - 1|`.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r - Matrix3::identity();
    let off = gram.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    off.max((r.determinant() - 1.0).abs())
}

fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        Pose::from_row_major(&values).map_err(serde::de::Error::custom)
    }
}
