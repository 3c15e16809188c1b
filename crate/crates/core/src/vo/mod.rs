//! Frame-to-frame RGB-D visual odometry.

mod config;
mod estimation;
mod features;
mod odometry;
mod pose;

pub use config::VoConfig;
pub use estimation::{backproject, estimate_relative_pose, RelativePose};
pub use features::{
    detect_features, detect_with_pattern, hamming, match_features, unsharp_mask, Descriptor,
    Keypoint, SamplingPattern, DESCRIPTOR_BITS,
};
pub use odometry::{frame_seed, run_odometry, FrameReport, OdometryResult, VoFrame};
pub use pose::{Pose, Trajectory};
