//! Keyframe selection, bundling and drift-triggered update planning over a
//! dynamic SLAM pose stream.

mod filter;
mod stats;
mod stream;

pub use filter::{
    assemble_bundle, bundle_drift, detect_update, keyframe_filter, plan_actions, Bundle, BundleFrame, FilterConfig,
    KeyframeDecision, PlannedAction, PoseFilter, ReconAction, UpdatePlan, THRESHOLD_EPSILON,
};
pub use stats::{stream_stats, FrameUpdates, Histogram, StreamStats, HISTOGRAM_CLIP};
pub use stream::{FrameId, PoseEvent, PoseStream, Tick};
