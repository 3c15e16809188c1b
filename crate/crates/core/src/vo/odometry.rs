use log::warn;

use super::config::VoConfig;
use super::estimation::{backproject, estimate_relative_pose};
use super::features::{detect_with_pattern, match_features, unsharp_mask, Keypoint, SamplingPattern};
use super::pose::{Pose, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::Rigid;
use crate::grid::{Plane, RgbImage};
use crate::intrinsics::Intrinsics;

/// One input frame: coded RGB, metric depth aligned to it, timestamp.
#[derive(Clone, Copy, Debug)]
pub struct VoFrame<'a> {
    pub rgb: &'a RgbImage,
    pub depth: &'a Plane,
    pub timestamp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameReport {
    pub keypoints: usize,
    pub matches: usize,
    pub correspondences: usize,
    /// `None` when tracking failed and the motion was extrapolated.
    pub inliers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdometryResult {
    pub trajectory: Trajectory,
    /// One entry per frame after the first.
    pub frames: Vec<FrameReport>,
}

impl OdometryResult {
    pub fn fallbacks(&self) -> usize {
        self.frames.iter().filter(|f| f.inliers.is_none()).count()
    }
}

pub fn frame_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn preprocess(frame: &VoFrame, config: &VoConfig, pattern: &SamplingPattern) -> Result<Vec<Keypoint>> {
    let luma = frame.rgb.luma();
    let sharp = unsharp_mask(&luma, config.unsharp_amount, config.unsharp_radius)?;
    Ok(detect_with_pattern(&sharp, config, pattern))
}

/// Frame-to-frame RGB-D odometry. The first pose is the identity; later
/// poses compose the inverse of each estimated relative motion.
pub fn run_odometry(frames: &[VoFrame], intrinsics: &Intrinsics, config: &VoConfig) -> Result<OdometryResult> {
    if frames.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "odometry needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    config.validate()?;
    intrinsics.validate()?;
    for f in frames {
        if f.rgb.dims() != f.depth.dims() {
            return Err(Error::InvalidArgument("depth map not aligned with rgb".into()));
        }
    }
    let pattern = SamplingPattern::new(config.seed);
    let features = crate::par::map_slice(frames, |f| preprocess(f, config, &pattern))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut poses = vec![Pose::identity(frames[0].timestamp)];
    let mut reports = Vec::with_capacity(frames.len() - 1);
    let mut world = Rigid::identity();
    let mut last_relative = Rigid::identity();
    for i in 1..frames.len() {
        let (kp_prev, kp_curr) = (&features[i - 1], &features[i]);
        let matches = match_features(kp_prev, kp_curr, config.match_ratio, config.max_descriptor_distance);
        let mut prev_pts = Vec::with_capacity(matches.len());
        let mut curr_pts = Vec::with_capacity(matches.len());
        for &(a, b) in &matches {
            let pa = backproject(kp_prev[a].x, kp_prev[a].y, frames[i - 1].depth, intrinsics, config.depth_gate);
            let pb = backproject(kp_curr[b].x, kp_curr[b].y, frames[i].depth, intrinsics, config.depth_gate);
            if let (Some(pa), Some(pb)) = (pa, pb) {
                prev_pts.push(pa);
                curr_pts.push(pb);
            }
        }
        let frame_config = VoConfig {
            seed: frame_seed(config.seed, i),
            ..config.clone()
        };
        let inliers = match estimate_relative_pose(&prev_pts, &curr_pts, &frame_config) {
            Ok(rel) => {
                last_relative = rel.transform;
                Some(rel.inliers)
            }
            Err(e) => {
                warn!(
                    "frame {i} (t={}): tracking failed ({e}); repeating the previous motion",
                    frames[i].timestamp
                );
                None
            }
        };
        world = world.compose(&last_relative.inverse());
        poses.push(Pose::from_rigid(world, frames[i].timestamp));
        reports.push(FrameReport {
            keypoints: kp_curr.len(),
            matches: matches.len(),
            correspondences: prev_pts.len(),
            inliers,
        });
    }
    Ok(OdometryResult {
        trajectory: Trajectory::new(poses)?,
        frames: reports,
    })
}
