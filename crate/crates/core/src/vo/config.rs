use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoConfig {
    pub pyramid_levels: usize,
    pub scale_factor: f64,
    pub max_features: usize,
    /// Meters; points farther than this are not used.
    pub depth_gate: f64,
    pub ransac_iterations: usize,
    /// Meters.
    pub inlier_threshold: f64,
    pub unsharp_amount: f64,
    /// Pixels.
    pub unsharp_radius: f64,
    pub min_inliers: usize,
    pub seed: u64,
    /// Corner response threshold relative to the strongest response per level.
    pub corner_threshold: f64,
    pub match_ratio: f64,
    /// Hamming distance cap out of 256 bits.
    pub max_descriptor_distance: u32,
}

impl Default for VoConfig {
    fn default() -> Self {
        VoConfig {
            pyramid_levels: 4,
            scale_factor: 1.2,
            max_features: 1000,
            depth_gate: 3.0,
            ransac_iterations: 500,
            inlier_threshold: 0.05,
            unsharp_amount: 1.0,
            unsharp_radius: 2.0,
            min_inliers: 12,
            seed: 0,
            corner_threshold: 0.01,
            match_ratio: 0.8,
            max_descriptor_distance: 64,
        }
    }
}

impl VoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Invariant {
                key: format!("vo.{key}"),
                message: message.to_string(),
            })
        };
        if self.pyramid_levels < 1 {
            return bad("pyramid_levels", "must be >= 1");
        }
        if !(self.scale_factor > 1.0) {
            return bad("scale_factor", "must be > 1");
        }
        if self.max_features == 0 {
            return bad("max_features", "must be positive");
        }
        if !(self.depth_gate > 0.0) {
            return bad("depth_gate", "must be > 0");
        }
        if self.ransac_iterations == 0 {
            return bad("ransac_iterations", "must be positive");
        }
        if !(self.inlier_threshold > 0.0) {
            return bad("inlier_threshold", "must be > 0");
        }
        if !(self.unsharp_amount >= 0.0) {
            return bad("unsharp_amount", "must be >= 0");
        }
        if !(self.unsharp_radius > 0.0) {
            return bad("unsharp_radius", "must be > 0");
        }
        if self.min_inliers < 3 {
            return bad("min_inliers", "must be >= 3");
        }
        if !(self.corner_threshold > 0.0 && self.corner_threshold < 1.0) {
            return bad("corner_threshold", "must lie in (0, 1)");
        }
        if !(self.match_ratio > 0.0 && self.match_ratio <= 1.0) {
            return bad("match_ratio", "must lie in (0, 1]");
        }
        Ok(())
    }
}
