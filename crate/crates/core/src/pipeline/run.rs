use crate::depth::{classify_depth, compute_depth_metrics, depth_cost_volume, DepthEstimate, DepthMetrics};
use crate::error::{Error, Result};
use crate::eval::{align_trajectories, AlignmentResult};
use crate::grid::{Plane, RgbImage};
use crate::io::{read_mask, DatasetIndex};
use crate::optics::{build_psf_bank, ApertureAmplitude, PhaseMask, PsfBank};
use crate::render::{add_sensor_noise, quantize_depth, render_coded, CodedFrame, DepthBins, SceneFrame};
use crate::vo::{frame_seed, run_odometry, OdometryResult, Trajectory, VoFrame};

use super::config::{EstimatorConfig, PipelineConfig};

/// Mask, pupil amplitude, bins and the PSF bank built from them.
#[derive(Clone, Debug)]
pub struct Optics {
    pub mask: PhaseMask,
    pub amplitude: ApertureAmplitude,
    pub bins: DepthBins,
    pub bank: PsfBank,
}

pub fn build_mask(config: &PipelineConfig) -> Result<PhaseMask> {
    let m = &config.mask;
    let mask = match &m.file {
        Some(path) => read_mask(path)?,
        None => PhaseMask::from_zernike(&m.zernike, m.grid, m.pitch)?,
    };
    Ok(mask.with_refractive_index(m.refractive()))
}

pub fn build_optics(config: &PipelineConfig) -> Result<Optics> {
    config.validate()?;
    let mask = build_mask(config)?;
    let amplitude = ApertureAmplitude::default_for(&mask, &config.camera);
    let bins = config.bins.build()?;
    let bank = build_psf_bank(&mask, &amplitude, &config.camera, bins.centers())?;
    Ok(Optics {
        mask,
        amplitude,
        bins,
        bank,
    })
}

/// Coded rendering of one frame plus optional sensor noise.
pub fn render_frame(frame: &SceneFrame, optics: &Optics, noise_sigma: f64, seed: u64) -> Result<CodedFrame> {
    let layers = quantize_depth(frame, &optics.bins);
    let coded = render_coded(frame, &layers, &optics.bank)?;
    add_sensor_noise(&coded, noise_sigma, seed)
}

pub fn estimate_depth(coded: &RgbImage, optics: &Optics, estimator: &EstimatorConfig) -> Result<DepthEstimate> {
    let costs = depth_cost_volume(coded, &optics.bank, estimator.window, estimator.snr)?;
    classify_depth(&costs, &optics.bins)
}

#[derive(Clone, Debug)]
pub struct FrameOutput {
    pub timestamp: f64,
    pub coded: CodedFrame,
    pub depth: DepthEstimate,
    /// Against the input depth; `None` when no pixel has valid depth.
    pub metrics: Option<DepthMetrics>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub frames: Vec<FrameOutput>,
    /// Pooled over every pixel of every frame.
    pub metrics: Option<DepthMetrics>,
    pub odometry: OdometryResult,
    pub alignment: Option<AlignmentResult>,
    pub bank_fingerprint: String,
}

impl PipelineOutput {
    pub fn ate(&self) -> Option<f64> {
        self.alignment.as_ref().map(|a| a.rmse)
    }
}

fn stack(planes: &[&Plane]) -> Result<Plane> {
    let (w, h) = planes[0].dims();
    if planes.iter().any(|p| p.dims() != (w, h)) {
        return Err(Error::InvalidArgument("frames differ in size".into()));
    }
    let data = planes.iter().flat_map(|p| p.data().iter().copied()).collect();
    Plane::from_vec(w, h * planes.len(), data)
}

/// Runs every stage on `count` frames produced by `load`. Frame `i` gets
/// noise seed `frame_seed(config.seed, i)`.
pub fn run_sequence(
    count: usize,
    timestamps: &[f64],
    load: impl Fn(usize) -> Result<SceneFrame> + Sync + Send,
    ground_truth: Option<&Trajectory>,
    config: &PipelineConfig,
    optics: &Optics,
) -> Result<PipelineOutput> {
    if count < 2 || timestamps.len() != count {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 frames with timestamps, got {count} frames and {} timestamps",
            timestamps.len()
        )));
    }
    let results = crate::par::map_range(count, |i| -> Result<(FrameOutput, Plane, crate::Intrinsics)> {
        let frame = load(i)?;
        let coded = render_frame(&frame, optics, config.render.noise_sigma, frame_seed(config.seed, i))?;
        let depth = estimate_depth(&coded.rgb, optics, &config.estimator)?;
        let metrics = compute_depth_metrics(&depth.depth, &frame.depth, config.eval.max_depth).ok();
        let out = FrameOutput {
            timestamp: timestamps[i],
            coded,
            depth,
            metrics,
        };
        Ok((out, frame.depth, frame.intrinsics))
    });
    let mut frames = Vec::with_capacity(count);
    let mut gt_depth = Vec::with_capacity(count);
    let mut intrinsics = None;
    for r in results {
        let (f, d, k) = r?;
        frames.push(f);
        gt_depth.push(d);
        intrinsics.get_or_insert(k);
    }
    let pred: Vec<&Plane> = frames.iter().map(|f| &f.depth.depth).collect();
    let gt: Vec<&Plane> = gt_depth.iter().collect();
    let metrics = compute_depth_metrics(&stack(&pred)?, &stack(&gt)?, config.eval.max_depth).ok();
    drop(gt_depth);

    let vo_frames: Vec<VoFrame> = frames
        .iter()
        .map(|f| VoFrame {
            rgb: &f.coded.rgb,
            depth: &f.depth.depth,
            timestamp: f.timestamp,
        })
        .collect();
    let odometry = run_odometry(&vo_frames, &intrinsics.expect("frames"), &config.vo)?;
    let alignment = match ground_truth {
        Some(gt) => Some(
            align_trajectories(&odometry.trajectory, gt, config.eval.max_dt, config.eval.with_scale)?.1,
        ),
        None => None,
    };
    Ok(PipelineOutput {
        frames,
        metrics,
        odometry,
        alignment,
        bank_fingerprint: optics.bank.fingerprint().to_string(),
    })
}

/// Full pipeline over a dataset folder.
pub fn run_pipeline(dataset: &DatasetIndex, config: &PipelineConfig) -> Result<PipelineOutput> {
    let optics = build_optics(config)?;
    let gt = dataset.ground_truth(config.dataset.gt_axis_flip)?;
    run_sequence(
        dataset.len(),
        &dataset.timestamps(),
        |i| dataset.load_frame(i),
        gt.as_ref(),
        config,
        &optics,
    )
}
