//! RGB-D sequence folders in TUM (`rgb.txt`/`depth.txt` listings) or
//! ICL-NUIM (numbered `rgb/N.png`, `depth/N.png`) layout.

use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::atomic::read_text;
use super::formats::{read_intrinsics, read_tum};
use super::png::{read_depth_png, read_rgb_png};
use crate::error::{Error, Result};
use crate::eval::associate_timestamps;
use crate::intrinsics::Intrinsics;
use crate::render::SceneFrame;
use crate::vo::{Pose, Trajectory};

/// Maximum rgb/depth timestamp gap when pairing TUM listings, seconds.
pub const PAIR_MAX_DT: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssociationMode {
    /// Timestamp listings when `rgb.txt` exists, numbered files otherwise.
    #[default]
    Auto,
    Timestamp,
    Index,
}

impl std::str::FromStr for AssociationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(AssociationMode::Auto),
            "timestamp" => Ok(AssociationMode::Timestamp),
            "index" => Ok(AssociationMode::Index),
            _ => Err(Error::InvalidArgument(format!(
                "unknown association mode {s:?} (expected auto, timestamp or index)"
            ))),
        }
    }
}

impl std::fmt::Display for AssociationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AssociationMode::Auto => "auto",
            AssociationMode::Timestamp => "timestamp",
            AssociationMode::Index => "index",
        })
    }
}

/// Axis negated in ground-truth poses to switch handedness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisFlip {
    #[default]
    None,
    X,
    Y,
    Z,
}

impl std::str::FromStr for AxisFlip {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AxisFlip::None),
            "x" => Ok(AxisFlip::X),
            "y" => Ok(AxisFlip::Y),
            "z" => Ok(AxisFlip::Z),
            _ => Err(Error::InvalidArgument(format!(
                "unknown axis flip {s:?} (expected none, x, y or z)"
            ))),
        }
    }
}

impl std::fmt::Display for AxisFlip {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AxisFlip::None => "none",
            AxisFlip::X => "x",
            AxisFlip::Y => "y",
            AxisFlip::Z => "z",
        })
    }
}

impl AxisFlip {
    /// Conjugates each pose by the reflection, which keeps rotations proper.
    pub fn apply(&self, traj: &Trajectory) -> Trajectory {
        let axis = match self {
            AxisFlip::None => return traj.clone(),
            AxisFlip::X => 0,
            AxisFlip::Y => 1,
            AxisFlip::Z => 2,
        };
        let mut f = Matrix3::identity();
        f[(axis, axis)] = -1.0;
        let poses = traj
            .poses()
            .iter()
            .map(|p| Pose {
                rotation: f * p.rotation * f,
                translation: f * p.translation,
                timestamp: p.timestamp,
            })
            .collect();
        Trajectory::new(poses).expect("timestamps unchanged")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEntry {
    pub timestamp: f64,
    pub rgb: PathBuf,
    pub depth: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub entries: Vec<DatasetEntry>,
    pub intrinsics: Intrinsics,
    /// Depth PNG units per meter.
    pub depth_scale: f64,
    pub gt_trajectory: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetOptions {
    pub mode: AssociationMode,
    /// Defaults to `root/intrinsics.txt`.
    pub intrinsics: Option<PathBuf>,
    /// Overrides the scale from the intrinsics file.
    pub depth_scale: Option<f64>,
}

/// `timestamp path` lines; paths are resolved against the listing's folder.
pub fn read_listing(path: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let text = read_text(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(t), Some(file)) = (it.next(), it.next()) else {
            return Err(Error::format(path, format!("line {}: expected `timestamp path`", i + 1)));
        };
        let t: f64 = t
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad timestamp", i + 1)))?;
        out.push((t, dir.join(file)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Writes `timestamp relative_path` lines.
pub fn write_listing(path: &Path, entries: &[(f64, String)]) -> Result<()> {
    let mut s = String::from("# timestamp filename\n");
    for (t, name) in entries {
        s.push_str(&format!("{t} {name}\n"));
    }
    super::atomic::write_text(path, &s)
}

fn tum_entries(root: &Path) -> Result<Vec<DatasetEntry>> {
    let rgb = read_listing(&root.join("rgb.txt"))?;
    let depth = read_listing(&root.join("depth.txt"))?;
    let tr: Vec<f64> = rgb.iter().map(|e| e.0).collect();
    let td: Vec<f64> = depth.iter().map(|e| e.0).collect();
    let pairs = associate_timestamps(&tr, &td, PAIR_MAX_DT);
    if pairs.len() < rgb.len() {
        warn!(
            "{}: {} of {} rgb frames have no depth within {PAIR_MAX_DT} s and were skipped",
            root.display(),
            rgb.len() - pairs.len(),
            rgb.len()
        );
    }
    Ok(pairs
        .into_iter()
        .map(|(i, j)| DatasetEntry {
            timestamp: rgb[i].0,
            rgb: rgb[i].1.clone(),
            depth: depth[j].1.clone(),
        })
        .collect())
}

fn numbered_pngs(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = e.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            if let Some(n) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
                out.push((n, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Frames are paired by number; the number doubles as the timestamp, which
/// matches the frame-indexed ground truth shipped with ICL-NUIM.
fn icl_entries(root: &Path) -> Result<Vec<DatasetEntry>> {
    let rgb = numbered_pngs(&root.join("rgb"))?;
    let depth: std::collections::BTreeMap<u64, PathBuf> = numbered_pngs(&root.join("depth"))?.into_iter().collect();
    let mut out = Vec::new();
    let mut missing = 0;
    for (n, path) in rgb {
        match depth.get(&n) {
            Some(d) => out.push(DatasetEntry {
                timestamp: n as f64,
                rgb: path,
                depth: d.clone(),
            }),
            None => missing += 1,
        }
    }
    if missing > 0 {
        warn!("{}: {missing} rgb frames have no matching depth and were skipped", root.display());
    }
    Ok(out)
}

fn find_ground_truth(root: &Path) -> Option<PathBuf> {
    let gt = root.join("groundtruth.txt");
    if gt.is_file() {
        return Some(gt);
    }
    let mut found: Vec<PathBuf> = std::fs::read_dir(root)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".gt.freiburg"))
        .collect();
    found.sort();
    found.into_iter().next()
}

pub fn load_dataset(root: &Path, mode: AssociationMode) -> Result<DatasetIndex> {
    load_dataset_with(root, &DatasetOptions { mode, ..Default::default() })
}

pub fn load_dataset_with(root: &Path, options: &DatasetOptions) -> Result<DatasetIndex> {
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let mode = match options.mode {
        AssociationMode::Auto if root.join("rgb.txt").is_file() => AssociationMode::Timestamp,
        AssociationMode::Auto => AssociationMode::Index,
        m => m,
    };
    let entries = match mode {
        AssociationMode::Timestamp => tum_entries(root)?,
        _ => icl_entries(root)?,
    };
    for e in &entries {
        for p in [&e.rgb, &e.depth] {
            if !p.is_file() {
                return Err(Error::MissingFile(p.clone()));
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(format!("no rgb-depth pairs under {}", root.display())));
    }
    let kpath = options.intrinsics.clone().unwrap_or_else(|| root.join("intrinsics.txt"));
    let k = read_intrinsics(&kpath)?;
    let depth_scale = options.depth_scale.unwrap_or(k.depth_scale);
    if !(depth_scale > 0.0) {
        return Err(Error::InvalidArgument("depth scale must be > 0".into()));
    }
    Ok(DatasetIndex {
        root: root.to_path_buf(),
        entries,
        intrinsics: k.intrinsics,
        depth_scale,
        gt_trajectory: find_ground_truth(root),
    })
}

impl DatasetIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.timestamp).collect()
    }

    /// Linear RGB and metric depth of entry `i`.
    pub fn load_frame(&self, i: usize) -> Result<SceneFrame> {
        let e = &self.entries[i];
        let rgb = read_rgb_png(&e.rgb)?;
        let depth = read_depth_png(&e.depth, self.depth_scale)?;
        SceneFrame::new(rgb, depth, self.intrinsics)
    }

    pub fn ground_truth(&self, flip: AxisFlip) -> Result<Option<Trajectory>> {
        self.gt_trajectory
            .as_ref()
            .map(|p| Ok(flip.apply(&read_tum(p)?)))
            .transpose()
    }
}
