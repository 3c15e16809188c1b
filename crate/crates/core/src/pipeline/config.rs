use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::depth::{DEFAULT_MAX_DEPTH, DEFAULT_SNR, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_MAX_DT;
use crate::io::{AssociationMode, AxisFlip};
use crate::optics::{CameraConfig, RefractiveIndex, DEFAULT_GRID, DEFAULT_GRID_PITCH, DEFAULT_ZERNIKE};
use crate::render::{make_depth_bins, BinSpacing, DepthBins, DEFAULT_BIN_COUNT, DEFAULT_FAR, DEFAULT_NEAR};
use crate::vo::VoConfig;

/// Phase mask source: a height-map file, or Zernike coefficients sampled on
/// a `grid × grid` plate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub file: Option<PathBuf>,
    pub grid: usize,
    /// Meters per mask cell.
    pub pitch: f64,
    /// Noll-ordered surface coefficients, meters.
    pub zernike: Vec<f64>,
    pub refractive_index: f64,
    /// Cauchy dispersion term in m²; 0 keeps the index constant.
    pub cauchy_b: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            file: None,
            grid: DEFAULT_GRID,
            pitch: DEFAULT_GRID_PITCH,
            zernike: DEFAULT_ZERNIKE.to_vec(),
            refractive_index: 1.5,
            cauchy_b: 0.0,
        }
    }
}

impl MaskConfig {
    pub fn refractive(&self) -> RefractiveIndex {
        if self.cauchy_b == 0.0 {
            RefractiveIndex::Constant(self.refractive_index)
        } else {
            RefractiveIndex::Cauchy {
                a: self.refractive_index,
                b: self.cauchy_b,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinsConfig {
    pub count: usize,
    pub near: f64,
    pub far: f64,
    pub spacing: BinSpacing,
}

impl Default for BinsConfig {
    fn default() -> Self {
        BinsConfig {
            count: DEFAULT_BIN_COUNT,
            near: DEFAULT_NEAR,
            far: DEFAULT_FAR,
            spacing: BinSpacing::Inverse,
        }
    }
}

impl BinsConfig {
    pub fn build(&self) -> Result<DepthBins> {
        make_depth_bins(self.count, self.near, self.far, self.spacing)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Side of the cost aggregation window, pixels.
    pub window: usize,
    pub snr: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            window: DEFAULT_WINDOW,
            snr: DEFAULT_SNR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub max_dt: f64,
    /// Trials per ablation row; the row reports the median.
    pub trials: usize,
    pub with_scale: bool,
    /// Ground truth beyond this depth is ignored by the depth metrics.
    pub max_depth: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_dt: DEFAULT_MAX_DT,
            trials: 1,
            with_scale: false,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Std. dev. of additive Gaussian sensor noise on linear intensities.
    pub noise_sigma: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub association: AssociationMode,
    /// Overrides the scale from the dataset's intrinsics file.
    pub depth_scale: Option<f64>,
    pub gt_axis_flip: AxisFlip,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub camera: CameraConfig,
    pub mask: MaskConfig,
    pub bins: BinsConfig,
    pub estimator: EstimatorConfig,
    pub vo: VoConfig,
    pub eval: EvalConfig,
    pub render: RenderConfig,
    pub dataset: DatasetConfig,
    /// Drives sensor noise; VO sampling uses `vo.seed`.
    pub seed: u64,
}

/// Why a single `key=value` assignment was rejected.
#[derive(Clone, Debug, PartialEq)]
pub enum SetError {
    UnknownKey,
    BadValue(String),
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, SetError> {
    v.parse()
        .map_err(|_| SetError::BadValue(format!("cannot parse {v:?} as {}", std::any::type_name::<T>())))
}

fn list(v: &str) -> std::result::Result<Vec<f64>, SetError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(s.trim())).collect()
}

fn parsed<T: std::str::FromStr<Err = Error>>(v: &str) -> std::result::Result<T, SetError> {
    v.parse().map_err(|e: Error| SetError::BadValue(e.to_string()))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn invariant(key: &str, message: impl Into<String>) -> Error {
    Error::Invariant {
        key: key.to_string(),
        message: message.into(),
    }
}

impl PipelineConfig {
    /// Applies one dotted assignment, e.g. `camera.focal_length`, `0.05`.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), SetError> {
        let v = value.trim();
        let c = &mut self.camera;
        match key {
            "camera.focal_length" => c.focal_length = num(v)?,
            "camera.f_number" => c.f_number = num(v)?,
            "camera.focus_distance" => c.focus_distance = num(v)?,
            "camera.pixel_pitch" => c.pixel_pitch = num(v)?,
            "camera.sensor_resolution" => {
                let (w, h) = v
                    .split_once('x')
                    .ok_or_else(|| SetError::BadValue(format!("expected WIDTHxHEIGHT, got {v:?}")))?;
                c.sensor_resolution = (num(w.trim())?, num(h.trim())?);
            }
            "camera.wavelengths" => {
                let w = list(v)?;
                c.wavelengths = w
                    .try_into()
                    .map_err(|_| SetError::BadValue("expected three wavelengths".into()))?;
            }
            "camera.pupil_samples" => c.pupil_samples = if v == "auto" { None } else { Some(num(v)?) },
            "camera.fft_size" => c.fft_size = num(v)?,
            "camera.psf_crop" => c.psf_crop = num(v)?,
            "mask.file" => self.mask.file = (!v.is_empty()).then(|| PathBuf::from(v)),
            "mask.grid" => self.mask.grid = num(v)?,
            "mask.pitch" => self.mask.pitch = num(v)?,
            "mask.zernike" => self.mask.zernike = list(v)?,
            "mask.refractive_index" => self.mask.refractive_index = num(v)?,
            "mask.cauchy_b" => self.mask.cauchy_b = num(v)?,
            "bins.count" => self.bins.count = num(v)?,
            "bins.near" => self.bins.near = num(v)?,
            "bins.far" => self.bins.far = num(v)?,
            "bins.spacing" => self.bins.spacing = parsed(v)?,
            "estimator.window" => self.estimator.window = num(v)?,
            "estimator.snr" => self.estimator.snr = num(v)?,
            "vo.pyramid_levels" => self.vo.pyramid_levels = num(v)?,
            "vo.scale_factor" => self.vo.scale_factor = num(v)?,
            "vo.max_features" => self.vo.max_features = num(v)?,
            "vo.depth_gate" => self.vo.depth_gate = num(v)?,
            "vo.ransac_iterations" => self.vo.ransac_iterations = num(v)?,
            "vo.inlier_threshold" => self.vo.inlier_threshold = num(v)?,
            "vo.unsharp_amount" => self.vo.unsharp_amount = num(v)?,
            "vo.unsharp_radius" => self.vo.unsharp_radius = num(v)?,
            "vo.min_inliers" => self.vo.min_inliers = num(v)?,
            "vo.seed" => self.vo.seed = num(v)?,
            "vo.corner_threshold" => self.vo.corner_threshold = num(v)?,
            "vo.match_ratio" => self.vo.match_ratio = num(v)?,
            "vo.max_descriptor_distance" => self.vo.max_descriptor_distance = num(v)?,
            "eval.max_dt" => self.eval.max_dt = num(v)?,
            "eval.trials" => self.eval.trials = num(v)?,
            "eval.with_scale" => self.eval.with_scale = num(v)?,
            "eval.max_depth" => self.eval.max_depth = num(v)?,
            "render.noise_sigma" => self.render.noise_sigma = num(v)?,
            "dataset.association" => self.dataset.association = parsed(v)?,
            "dataset.depth_scale" => self.dataset.depth_scale = if v == "auto" { None } else { Some(num(v)?) },
            "dataset.gt_axis_flip" => self.dataset.gt_axis_flip = parsed(v)?,
            "seed" => self.seed = num(v)?,
            _ => return Err(SetError::UnknownKey),
        }
        Ok(())
    }

    /// Every key with its current value, in a form `set` accepts back.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let c = &self.camera;
        let v = &self.vo;
        vec![
            ("camera.focal_length", c.focal_length.to_string()),
            ("camera.f_number", c.f_number.to_string()),
            ("camera.focus_distance", c.focus_distance.to_string()),
            ("camera.pixel_pitch", c.pixel_pitch.to_string()),
            (
                "camera.sensor_resolution",
                format!("{}x{}", c.sensor_resolution.0, c.sensor_resolution.1),
            ),
            ("camera.wavelengths", join(&c.wavelengths)),
            (
                "camera.pupil_samples",
                c.pupil_samples.map_or("auto".into(), |s| s.to_string()),
            ),
            ("camera.fft_size", c.fft_size.to_string()),
            ("camera.psf_crop", c.psf_crop.to_string()),
            (
                "mask.file",
                self.mask.file.as_ref().map_or(String::new(), |p| p.display().to_string()),
            ),
            ("mask.grid", self.mask.grid.to_string()),
            ("mask.pitch", self.mask.pitch.to_string()),
            ("mask.zernike", join(&self.mask.zernike)),
            ("mask.refractive_index", self.mask.refractive_index.to_string()),
            ("mask.cauchy_b", self.mask.cauchy_b.to_string()),
            ("bins.count", self.bins.count.to_string()),
            ("bins.near", self.bins.near.to_string()),
            ("bins.far", self.bins.far.to_string()),
            (
                "bins.spacing",
                match self.bins.spacing {
                    BinSpacing::Inverse => "inverse".into(),
                    BinSpacing::Linear => "linear".into(),
                },
            ),
            ("estimator.window", self.estimator.window.to_string()),
            ("estimator.snr", self.estimator.snr.to_string()),
            ("vo.pyramid_levels", v.pyramid_levels.to_string()),
            ("vo.scale_factor", v.scale_factor.to_string()),
            ("vo.max_features", v.max_features.to_string()),
            ("vo.depth_gate", v.depth_gate.to_string()),
            ("vo.ransac_iterations", v.ransac_iterations.to_string()),
            ("vo.inlier_threshold", v.inlier_threshold.to_string()),
            ("vo.unsharp_amount", v.unsharp_amount.to_string()),
            ("vo.unsharp_radius", v.unsharp_radius.to_string()),
            ("vo.min_inliers", v.min_inliers.to_string()),
            ("vo.seed", v.seed.to_string()),
            ("vo.corner_threshold", v.corner_threshold.to_string()),
            ("vo.match_ratio", v.match_ratio.to_string()),
            ("vo.max_descriptor_distance", v.max_descriptor_distance.to_string()),
            ("eval.max_dt", self.eval.max_dt.to_string()),
            ("eval.trials", self.eval.trials.to_string()),
            ("eval.with_scale", self.eval.with_scale.to_string()),
            ("eval.max_depth", self.eval.max_depth.to_string()),
            ("render.noise_sigma", self.render.noise_sigma.to_string()),
            ("dataset.association", self.dataset.association.to_string()),
            (
                "dataset.depth_scale",
                self.dataset.depth_scale.map_or("auto".into(), |s| s.to_string()),
            ),
            ("dataset.gt_axis_flip", self.dataset.gt_axis_flip.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    /// `key=value` text that parses back to an equal config.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.vo.validate()?;
        let m = &self.mask;
        if m.file.is_none() && m.grid < 1 {
            return Err(invariant("mask.grid", "must be >= 1"));
        }
        if !(m.pitch > 0.0) {
            return Err(invariant("mask.pitch", "must be > 0"));
        }
        if !(m.refractive_index >= 1.0) {
            return Err(invariant("mask.refractive_index", "must be >= 1"));
        }
        if !m.cauchy_b.is_finite() {
            return Err(invariant("mask.cauchy_b", "must be finite"));
        }
        if m.zernike.iter().any(|z| !z.is_finite()) {
            return Err(invariant("mask.zernike", "coefficients must be finite"));
        }
        if self.bins.count < 1 {
            return Err(invariant("bins.count", "must be >= 1"));
        }
        if !(self.bins.near > 0.0) {
            return Err(invariant("bins.near", "must be > 0"));
        }
        if !(self.bins.far > self.bins.near) || !self.bins.far.is_finite() {
            return Err(invariant("bins.far", "must be finite and exceed bins.near"));
        }
        if self.estimator.window < 1 {
            return Err(invariant("estimator.window", "must be >= 1"));
        }
        if !(self.estimator.snr > 0.0) {
            return Err(invariant("estimator.snr", "must be > 0"));
        }
        if !(self.eval.max_dt >= 0.0) {
            return Err(invariant("eval.max_dt", "must be >= 0"));
        }
        if self.eval.trials < 1 {
            return Err(invariant("eval.trials", "must be >= 1"));
        }
        if !(self.eval.max_depth > 0.0) {
            return Err(invariant("eval.max_depth", "must be > 0"));
        }
        if !(self.render.noise_sigma >= 0.0) || !self.render.noise_sigma.is_finite() {
            return Err(invariant("render.noise_sigma", "must be finite and >= 0"));
        }
        if self.dataset.depth_scale.is_some_and(|s| !(s > 0.0)) {
            return Err(invariant("dataset.depth_scale", "must be > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = PipelineConfig::default();
        c.camera.pixel_pitch = 1.0 / 3.0 * 1e-5;
        c.mask.file = Some("masks/a.txt".into());
        c.dataset.depth_scale = Some(1000.0);
        c.seed = u64::MAX;
        let mut back = PipelineConfig::default();
        for line in c.to_config_text().lines() {
            let (k, v) = line.split_once('=').unwrap();
            back.set(k, v).unwrap();
        }
        assert_eq!(back, c);
    }

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }
}
