//! Single-frame depth estimation, depth metrics and training losses.

mod estimator;
mod metrics;

pub use estimator::{
    channel_cost_volume, classify_depth, depth_cost_volume, wiener_deconvolve, CostVolume,
    DepthEstimate, CONFIDENCE_EPS, DEFAULT_SNR, DEFAULT_WINDOW,
};
pub use metrics::{
    compute_depth_metrics, depth_weighted_loss, l1_loss, DepthMetrics, LossWeights,
    DEFAULT_MAX_DEPTH, DELTA1_THRESHOLD, NEAR_RANGE,
};
