use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BinSpacing {
    #[default]
    Inverse,
    Linear,
}

impl std::str::FromStr for BinSpacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(BinSpacing::Inverse),
            "linear" => Ok(BinSpacing::Linear),
            _ => Err(Error::InvalidArgument(format!(
                "unknown bin spacing {s:?} (expected inverse or linear)"
            ))),
        }
    }
}

/// Discrete depth layers. Centers are sorted ascending, so bin 0 is the
/// nearest layer and bin `count - 1` the farthest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthBins {
    pub near: f64,
    pub far: f64,
    pub spacing: BinSpacing,
    centers: Vec<f64>,
}

pub const DEFAULT_BIN_COUNT: usize = 27;
pub const DEFAULT_NEAR: f64 = 0.5;
pub const DEFAULT_FAR: f64 = 6.0;

impl Default for DepthBins {
    fn default() -> Self {
        make_depth_bins(DEFAULT_BIN_COUNT, DEFAULT_NEAR, DEFAULT_FAR, BinSpacing::Inverse)
            .expect("default bins are valid")
    }
}

pub fn make_depth_bins(count: usize, near: f64, far: f64, spacing: BinSpacing) -> Result<DepthBins> {
    if count < 1 {
        return Err(Error::InvalidArgument("bin count must be >= 1".into()));
    }
    if !(near > 0.0 && far > near && far.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "depth range must satisfy 0 < near < far, got [{near}, {far}]"
        )));
    }
    let n = count as f64;
    let mut centers: Vec<f64> = match spacing {
        BinSpacing::Inverse => {
            let (lo, hi) = (1.0 / far, 1.0 / near);
            (0..count)
                .map(|i| 1.0 / (lo + (hi - lo) * (i as f64 + 0.5) / n))
                .collect()
        }
        BinSpacing::Linear => (0..count)
            .map(|i| near + (far - near) * (i as f64 + 0.5) / n)
            .collect(),
    };
    centers.sort_by(f64::total_cmp);
    Ok(DepthBins {
        near,
        far,
        spacing,
        centers,
    })
}

impl DepthBins {
    /// Bins at explicit centers, e.g. read back from a PSF bank index.
    pub fn from_centers(centers: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("no bin centers".into()));
        }
        if centers.iter().any(|&c| !(c > 0.0 && c.is_finite()))
            || centers.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::InvalidArgument(
                "bin centers must be positive and strictly increasing".into(),
            ));
        }
        Ok(DepthBins {
            near: centers[0],
            far: centers[centers.len() - 1],
            spacing: BinSpacing::Inverse,
            centers,
        })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    /// Bin whose center is nearest in inverse depth; an exact tie goes to
    /// the smaller depth.
    pub fn nearest(&self, depth: f64) -> usize {
        let inv = 1.0 / depth;
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &c) in self.centers.iter().enumerate() {
            let dist = (inv - 1.0 / c).abs();
            // relative slack absorbs rounding in midpoints
            if dist < best_dist - 1e-12 * inv.abs().max(1.0 / c) {
                best = i;
                best_dist = dist;
            }
        }
        best
    }
}
