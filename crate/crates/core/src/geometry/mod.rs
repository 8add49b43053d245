//! Rigid transforms, the pinhole camera and depth images.

mod camera;
mod depth;
mod pose;

pub use camera::{project, Intrinsics, Projection};
pub use depth::DepthImage;
pub use pose::{orthonormality_error, Pose, FILE_ORTHONORMAL_TOLERANCE, ORTHONORMAL_TOLERANCE};
