use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde_json::json;

use codedcam::depth::{compute_depth_metrics, DepthEstimate, DepthMetrics};
use codedcam::eval::{
    align_trajectories, associate_timestamps, format_ablation_table, run_ablation, AblationAxis, AblationSpec,
    AlignmentResult,
};
use codedcam::io::{
    apply_overrides, export_psf_bank, load_dataset_with, parse_config, read_depth_png, read_intrinsics, read_listing,
    read_rgb_pfm, read_tum, write_depth_bins, write_depth_png, write_intrinsics, write_listing, write_mask,
    write_pfm, write_rgb_pfm, write_text, write_tum, DatasetIndex, DatasetOptions, RunManifest, CONFIG_ENV,
};
use codedcam::pipeline::{build_optics, estimate_depth, render_frame, run_pipeline, Optics, PipelineConfig};
use codedcam::render::CodedFrame;
use codedcam::synth::SynthSequence;
use codedcam::vo::{frame_seed, run_odometry, Trajectory, VoFrame};
use codedcam::{par, Plane};

use super::{Cli, Command};

/// Bad command-line input that clap cannot catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<(PipelineConfig, Option<PathBuf>)> {
    let path = path
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut config = match &path {
        Some(p) if p.extension().is_some_and(|e| e == "json") => {
            let m = RunManifest::read(p)?;
            m.config.validate()?;
            m.config
        }
        Some(p) => parse_config(p).with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    apply_overrides(&mut config, overrides)?;
    Ok((config, path))
}

struct Run {
    manifest: RunManifest,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn new(command: &str, args: &[String], config: &PipelineConfig, config_path: Option<&Path>) -> Result<Self> {
        let mut manifest = RunManifest::new(command, args.to_vec(), config);
        if let Some(p) = config_path {
            manifest.add_inputs([p])?;
        }
        Ok(Run {
            manifest,
            outputs: Vec::new(),
        })
    }

    fn input(&mut self, p: &Path) -> Result<()> {
        Ok(self.manifest.add_inputs([p])?)
    }

    fn dataset_inputs(&mut self, d: &DatasetIndex) -> Result<()> {
        for name in ["rgb.txt", "depth.txt", "intrinsics.txt"] {
            let p = d.root.join(name);
            if p.is_file() {
                self.input(&p)?;
            }
        }
        if let Some(gt) = &d.gt_trajectory {
            self.input(gt)?;
        }
        for e in &d.entries {
            self.input(&e.rgb)?;
            self.input(&e.depth)?;
        }
        Ok(())
    }

    fn output(&mut self, p: PathBuf) {
        self.outputs.push(p);
    }

    fn finish(mut self, dir: &Path) -> Result<()> {
        self.manifest.add_outputs(self.outputs.iter().map(PathBuf::as_path))?;
        let p = self.manifest.write(dir)?;
        info!("wrote {}", p.display());
        Ok(())
    }
}

fn load_dataset(root: &Path, config: &PipelineConfig) -> Result<DatasetIndex> {
    let opts = DatasetOptions {
        mode: config.dataset.association,
        intrinsics: None,
        depth_scale: config.dataset.depth_scale,
    };
    let d = load_dataset_with(root, &opts).with_context(|| format!("loading dataset {}", root.display()))?;
    info!("{}: {} frames", root.display(), d.len());
    Ok(d)
}

fn frame_name(i: usize, ext: &str) -> String {
    format!("{i:06}.{ext}")
}

/// Coded frames as linear-light PFM plus a timestamp listing.
fn write_coded(out: &Path, run: &mut Run, timestamps: &[f64], frames: &[&CodedFrame], d: &DatasetIndex) -> Result<()> {
    let mut listing = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let rel = format!("rgb/{}", frame_name(i, "pfm"));
        let p = out.join(&rel);
        write_rgb_pfm(&p, &f.rgb)?;
        run.output(p);
        listing.push((timestamps[i], rel));
    }
    let p = out.join("rgb.txt");
    write_listing(&p, &listing)?;
    run.output(p);
    let p = out.join("intrinsics.txt");
    write_intrinsics(&p, &d.intrinsics, d.depth_scale)?;
    run.output(p);
    Ok(())
}

fn write_depths(
    out: &Path,
    run: &mut Run,
    timestamps: &[f64],
    depths: &[&DepthEstimate],
    depth_scale: f64,
) -> Result<()> {
    let mut listing = Vec::with_capacity(depths.len());
    for (i, d) in depths.iter().enumerate() {
        let rel = format!("depth/{}", frame_name(i, "png"));
        let p = out.join(&rel);
        write_depth_png(&p, &d.depth, depth_scale)?;
        run.output(p);
        let p = out.join("confidence").join(frame_name(i, "pfm"));
        write_pfm(&p, &[&d.confidence])?;
        run.output(p);
        listing.push((timestamps[i], rel));
    }
    let p = out.join("depth.txt");
    write_listing(&p, &listing)?;
    run.output(p);
    Ok(())
}

fn write_json(path: PathBuf, run: &mut Run, value: &serde_json::Value) -> Result<()> {
    write_text(&path, &(serde_json::to_string_pretty(value)? + "\n"))?;
    run.output(path);
    Ok(())
}

fn metrics_json(m: &Option<DepthMetrics>) -> serde_json::Value {
    match m {
        Some(m) => serde_json::to_value(m).expect("metrics serialize"),
        None => serde_json::Value::Null,
    }
}

fn alignment_json(a: &AlignmentResult) -> serde_json::Value {
    json!({
        "ate_m": a.rmse,
        "pairs_used": a.pairs_used,
        "scale": a.scale,
        "rotation": (0..3).map(|r| (0..3).map(|c| a.rotation[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "translation": [a.translation.x, a.translation.y, a.translation.z],
    })
}

fn write_trajectory(out: &Path, run: &mut Run, t: &Trajectory) -> Result<()> {
    let p = out.join("trajectory.txt");
    write_tum(&p, t)?;
    run.output(p);
    Ok(())
}

fn cmd_psf(out: &Path, config: &PipelineConfig, run: &mut Run) -> Result<()> {
    let optics = build_optics(config)?;
    let dir = out.join("psf");
    export_psf_bank(&dir, &optics.bank)?;
    run.output(dir.join("index.txt"));
    let p = out.join("mask.txt");
    write_mask(&p, &optics.mask)?;
    run.output(p);
    let p = out.join("bins.txt");
    write_depth_bins(&p, &optics.bins)?;
    run.output(p);
    run.manifest.notes.insert("psf_fingerprint".into(), optics.bank.fingerprint().into());
    println!("{} PSFs, fingerprint {}", optics.bank.psfs().len(), optics.bank.fingerprint());
    Ok(())
}

fn render_all(d: &DatasetIndex, optics: &Optics, config: &PipelineConfig) -> Result<Vec<CodedFrame>> {
    par::map_range(d.len(), |i| {
        let frame = d.load_frame(i)?;
        render_frame(&frame, optics, config.render.noise_sigma, frame_seed(config.seed, i))
    })
    .into_iter()
    .collect::<codedcam::Result<Vec<_>>>()
    .map_err(Into::into)
}

fn cmd_render(dataset: &Path, out: &Path, config: &PipelineConfig, run: &mut Run) -> Result<()> {
    let d = load_dataset(dataset, config)?;
    run.dataset_inputs(&d)?;
    let optics = build_optics(config)?;
    let coded = render_all(&d, &optics, config)?;
    let refs: Vec<&CodedFrame> = coded.iter().collect();
    write_coded(out, run, &d.timestamps(), &refs, &d)?;
    run.manifest.notes.insert("psf_fingerprint".into(), optics.bank.fingerprint().into());
    println!("rendered {} frames into {}", coded.len(), out.display());
    Ok(())
}

/// Coded frames listed by a `render` output folder.
fn read_coded_listing(coded: &Path, run: &mut Run) -> Result<(Vec<(f64, PathBuf)>, codedcam::io::CameraIntrinsicsFile)> {
    let listing_path = coded.join("rgb.txt");
    let listing = read_listing(&listing_path)?;
    if listing.is_empty() {
        return Err(codedcam::Error::EmptyDataset(format!("{} lists no frames", listing_path.display())).into());
    }
    run.input(&listing_path)?;
    let kpath = coded.join("intrinsics.txt");
    let k = read_intrinsics(&kpath)?;
    run.input(&kpath)?;
    for (_, p) in &listing {
        run.input(p)?;
    }
    Ok((listing, k))
}

fn stack(planes: &[&Plane]) -> codedcam::Result<Plane> {
    let (w, h) = planes[0].dims();
    let data = planes.iter().flat_map(|p| p.data().iter().copied()).collect();
    Plane::from_vec(w, h * planes.len(), data)
}

fn cmd_depth(coded: &Path, out: &Path, dataset: Option<&Path>, config: &PipelineConfig, run: &mut Run) -> Result<()> {
    let (listing, k) = read_coded_listing(coded, run)?;
    let optics = build_optics(config)?;
    let estimates = par::map_range(listing.len(), |i| {
        let rgb = read_rgb_pfm(&listing[i].1)?;
        estimate_depth(&rgb, &optics, &config.estimator)
    })
    .into_iter()
    .collect::<codedcam::Result<Vec<_>>>()?;
    let ts: Vec<f64> = listing.iter().map(|e| e.0).collect();
    let refs: Vec<&DepthEstimate> = estimates.iter().collect();
    write_depths(out, run, &ts, &refs, k.depth_scale)?;
    if let Some(root) = dataset {
        let d = load_dataset(root, config)?;
        let pairs = associate_timestamps(&ts, &d.timestamps(), config.eval.max_dt);
        if pairs.is_empty() {
            return Err(codedcam::Error::Association("no coded frame matches a dataset frame".into()).into());
        }
        let mut pred = Vec::new();
        let mut gt = Vec::new();
        for &(i, j) in &pairs {
            run.input(&d.entries[j].depth)?;
            gt.push(read_depth_png(&d.entries[j].depth, d.depth_scale)?);
            pred.push(&estimates[i].depth);
        }
        let gt_refs: Vec<&Plane> = gt.iter().collect();
        let m = compute_depth_metrics(&stack(&pred)?, &stack(&gt_refs)?, config.eval.max_depth)?;
        write_json(out.join("metrics.json"), run, &metrics_json(&Some(m.clone())))?;
        print!("{}", m.to_report());
    }
    println!("estimated {} depth maps into {}", estimates.len(), out.display());
    Ok(())
}

fn cmd_vo(coded: &Path, depth: &Path, out: &Path, config: &PipelineConfig, run: &mut Run) -> Result<()> {
    let (listing, k) = read_coded_listing(coded, run)?;
    let dpath = depth.join("depth.txt");
    let dlist = read_listing(&dpath)?;
    run.input(&dpath)?;
    let ts: Vec<f64> = listing.iter().map(|e| e.0).collect();
    let td: Vec<f64> = dlist.iter().map(|e| e.0).collect();
    let pairs = associate_timestamps(&ts, &td, config.eval.max_dt);
    if pairs.len() < 2 {
        return Err(codedcam::Error::EmptyDataset("fewer than 2 coded frames have a depth map".into()).into());
    }
    let loaded = par::map_slice(&pairs, |&(i, j)| -> codedcam::Result<_> {
        Ok((read_rgb_pfm(&listing[i].1)?, read_depth_png(&dlist[j].1, k.depth_scale)?, ts[i]))
    })
    .into_iter()
    .collect::<codedcam::Result<Vec<_>>>()?;
    for &(_, j) in &pairs {
        run.input(&dlist[j].1)?;
    }
    let frames: Vec<VoFrame> = loaded
        .iter()
        .map(|(rgb, depth, t)| VoFrame {
            rgb,
            depth,
            timestamp: *t,
        })
        .collect();
    let result = run_odometry(&frames, &k.intrinsics, &config.vo)?;
    write_trajectory(out, run, &result.trajectory)?;
    let report: Vec<_> = result
        .frames
        .iter()
        .map(|f| json!({"keypoints": f.keypoints, "matches": f.matches, "correspondences": f.correspondences, "inliers": f.inliers}))
        .collect();
    write_json(out.join("vo.json"), run, &json!({"fallbacks": result.fallbacks(), "frames": report}))?;
    println!("tracked {} frames ({} fallbacks)", frames.len(), result.fallbacks());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ate(
    est: &Path,
    gt: &Path,
    max_dt: Option<f64>,
    with_scale: bool,
    csv: Option<&Path>,
    out: Option<&Path>,
    config: &PipelineConfig,
    run: &mut Run,
) -> Result<()> {
    let e = read_tum(est)?;
    let g = read_tum(gt)?;
    run.input(est)?;
    run.input(gt)?;
    let max_dt = max_dt.unwrap_or(config.eval.max_dt);
    if !(max_dt >= 0.0) {
        return Err(UsageError(format!("--max-dt must be >= 0, got {max_dt}")).into());
    }
    let (pairs, a) = align_trajectories(&e, &g, max_dt, with_scale || config.eval.with_scale)?;
    println!("{:.6}", a.rmse);
    if let Some(p) = csv {
        let mut s = String::from("timestamp,aligned_x,aligned_y,aligned_z,gt_x,gt_y,gt_z,residual\n");
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let (x, y) = (a.aligned[k], g.poses()[j].translation);
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                e.poses()[i].timestamp,
                x.x,
                x.y,
                x.z,
                y.x,
                y.y,
                y.z,
                a.residuals[k]
            ));
        }
        write_text(p, &s)?;
        run.output(p.to_path_buf());
    }
    if let Some(dir) = out {
        write_json(dir.join("ate.json"), run, &alignment_json(&a))?;
    }
    Ok(())
}

fn cmd_pipeline(dataset: &Path, out: &Path, config: &PipelineConfig, run: &mut Run) -> Result<()> {
    let d = load_dataset(dataset, config)?;
    run.dataset_inputs(&d)?;
    let result = run_pipeline(&d, config)?;
    let ts: Vec<f64> = result.frames.iter().map(|f| f.timestamp).collect();
    let coded: Vec<&CodedFrame> = result.frames.iter().map(|f| &f.coded).collect();
    write_coded(&out.join("coded"), run, &ts, &coded, &d)?;
    let depths: Vec<&DepthEstimate> = result.frames.iter().map(|f| &f.depth).collect();
    write_depths(&out.join("depth"), run, &ts, &depths, d.depth_scale)?;
    write_trajectory(out, run, &result.odometry.trajectory)?;
    write_json(out.join("metrics.json"), run, &metrics_json(&result.metrics))?;
    let ate = result.alignment.as_ref().map(alignment_json).unwrap_or(serde_json::Value::Null);
    write_json(
        out.join("report.json"),
        run,
        &json!({
            "frames": result.frames.len(),
            "fallbacks": result.odometry.fallbacks(),
            "alignment": ate,
            "psf_fingerprint": result.bank_fingerprint,
        }),
    )?;
    run.manifest.notes.insert("psf_fingerprint".into(), result.bank_fingerprint.clone());
    if let Some(m) = &result.metrics {
        print!("{}", m.to_report());
    }
    match result.ate() {
        Some(a) => println!("ate_m={a:.6}"),
        None => println!("ate_m=nan (no ground-truth trajectory)"),
    }
    Ok(())
}

fn cmd_ablate(dataset: &Path, axis: &str, values: &str, out: &Path, config: &PipelineConfig, run: &mut Run) -> Result<u8> {
    let axis: AblationAxis = axis.parse()?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| UsageError(format!("bad ablation value {v:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = AblationSpec::new(axis, values)?;
    let d = load_dataset(dataset, config)?;
    run.dataset_inputs(&d)?;
    let table = run_ablation(&spec, config, &d)?;
    let text = format_ablation_table(&table);
    print!("{text}");
    let p = out.join("ablation.txt");
    write_text(&p, &text)?;
    run.output(p);
    let p = out.join("ablation.json");
    write_text(&p, &(table.to_json() + "\n"))?;
    run.output(p);
    Ok(if table.failed_rows() > 0 { 1 } else { 0 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    out: &Path,
    frames: usize,
    width: usize,
    height: usize,
    near: f64,
    far: f64,
    scene_seed: u64,
    config: &PipelineConfig,
    run: &mut Run,
) -> Result<()> {
    if frames < 2 || width < 8 || height < 8 {
        return Err(UsageError("synth needs >= 2 frames and at least 8x8 pixels".into()).into());
    }
    if !(near > 0.0 && far > near) {
        return Err(UsageError(format!("need 0 < near < far, got {near} and {far}")).into());
    }
    let bins = config.bins.build()?;
    let snap = |z: f64| bins.centers()[bins.nearest(z)];
    let (near, far) = (snap(near), snap(far));
    if near == far {
        return Err(UsageError("near and far snap to the same depth bin".into()).into());
    }
    let seq = SynthSequence::two_plane(width, height, frames, near, far, scene_seed);
    seq.write_dataset(out)?;
    for name in ["rgb.txt", "depth.txt", "groundtruth.txt", "intrinsics.txt"] {
        run.output(out.join(name));
    }
    for i in 0..frames {
        run.output(out.join("rgb").join(frame_name(i, "png")));
        run.output(out.join("depth").join(frame_name(i, "png")));
    }
    run.manifest.notes.insert("near_m".into(), near.to_string());
    run.manifest.notes.insert("far_m".into(), far.to_string());
    println!("wrote {frames} frames ({width}x{height}, planes at {near} m and {far} m) to {}", out.display());
    Ok(())
}

pub fn run(cli: Cli, args: &[String], overrides: &[(String, String)]) -> Result<u8> {
    let (config, config_path) = load_config(cli.config.as_deref(), overrides)?;
    let name = match &cli.command {
        Command::Psf { .. } => "psf",
        Command::Render { .. } => "render",
        Command::Depth { .. } => "depth",
        Command::Vo { .. } => "vo",
        Command::Ate { .. } => "ate",
        Command::Pipeline { .. } => "pipeline",
        Command::Ablate { .. } => "ablate",
        Command::Synth { .. } => "synth",
    };
    let mut run = Run::new(name, args, &config, config_path.as_deref())?;
    let mut code = 0;
    let out = match &cli.command {
        Command::Psf { out } => {
            cmd_psf(out, &config, &mut run)?;
            Some(out.clone())
        }
        Command::Render { dataset, out } => {
            cmd_render(dataset, out, &config, &mut run)?;
            Some(out.clone())
        }
        Command::Depth { coded, out, dataset } => {
            cmd_depth(coded, out, dataset.as_deref(), &config, &mut run)?;
            Some(out.clone())
        }
        Command::Vo { coded, depth, out } => {
            cmd_vo(coded, depth, out, &config, &mut run)?;
            Some(out.clone())
        }
        Command::Ate {
            est,
            gt,
            max_dt,
            with_scale,
            csv,
            out,
        } => {
            cmd_ate(est, gt, *max_dt, *with_scale, csv.as_deref(), out.as_deref(), &config, &mut run)?;
            out.clone()
        }
        Command::Pipeline { dataset, out } => {
            cmd_pipeline(dataset, out, &config, &mut run)?;
            Some(out.clone())
        }
        Command::Ablate {
            dataset,
            axis,
            values,
            out,
        } => {
            code = cmd_ablate(dataset, axis, values, out, &config, &mut run)?;
            Some(out.clone())
        }
        Command::Synth {
            out,
            frames,
            width,
            height,
            near,
            far,
            scene_seed,
        } => {
            cmd_synth(out, *frames, *width, *height, *near, *far, *scene_seed, &config, &mut run)?;
            Some(out.clone())
        }
    };
    if let Some(dir) = out {
        run.finish(&dir)?;
    }
    Ok(code)
}
