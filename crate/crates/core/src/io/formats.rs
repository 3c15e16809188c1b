//! Plain-text formats: mask height maps, PSF bank exports, depth bins, TUM
//! trajectories and intrinsics. Floats are written in shortest round-trip
//! form, so reading back reproduces every value exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::atomic::{read_text, write_text};
use super::pfm::{read_pfm, write_pfm};
use crate::error::{Error, Result};
use crate::grid::Plane;
use crate::intrinsics::Intrinsics;
use crate::optics::{PhaseMask, Psf, PsfBank, RefractiveIndex};
use crate::render::{BinSpacing, DepthBins};
use crate::vo::{Pose, Trajectory};

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_floats(path: &Path, line: usize, text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::format(path, format!("line {line}: bad number {t:?}")))
        })
        .collect()
}

/// Header `grid pitch [n | a b]`, then `grid` rows of heights in meters.
pub fn write_mask(path: &Path, mask: &PhaseMask) -> Result<()> {
    let mut s = String::from("# phase mask heights, meters\n");
    let n = match mask.refractive_index {
        RefractiveIndex::Constant(n) => format!("{n:e}"),
        RefractiveIndex::Cauchy { a, b } => format!("{a:e} {b:e}"),
    };
    let _ = writeln!(s, "{} {:e} {n}", mask.grid(), mask.grid_pitch());
    let hm = mask.height_map();
    for y in 0..mask.grid() {
        let row: Vec<String> = (0..mask.grid()).map(|x| format!("{:e}", hm.get(x, y))).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn read_mask(path: &Path) -> Result<PhaseMask> {
    let text = read_text(path)?;
    let mut lines = content_lines(&text);
    let (ln, header) = lines.next().ok_or_else(|| Error::format(path, "empty mask file"))?;
    let head = parse_floats(path, ln, header)?;
    if !(2..=4).contains(&head.len()) || head[0] < 1.0 || head[0].fract() != 0.0 {
        return Err(Error::format(path, "header must be `grid pitch [n | a b]`"));
    }
    let grid = head[0] as usize;
    let mut data = Vec::with_capacity(grid * grid);
    for (ln, line) in lines {
        let row = parse_floats(path, ln, line)?;
        if row.len() != grid {
            return Err(Error::format(path, format!("line {ln}: expected {grid} values")));
        }
        data.extend(row);
    }
    if data.len() != grid * grid {
        return Err(Error::format(path, format!("expected {grid} rows")));
    }
    let index = match head.len() {
        2 => RefractiveIndex::default(),
        3 => RefractiveIndex::Constant(head[2]),
        _ => RefractiveIndex::Cauchy { a: head[2], b: head[3] },
    };
    Ok(PhaseMask::from_height_map(Plane::from_vec(grid, grid, data)?, head[1])?.with_refractive_index(index))
}

const BANK_INDEX: &str = "index.txt";

/// Writes `index.txt` (`bin channel depth wavelength file` per line) and one
/// gray PFM per kernel into `dir`.
pub fn export_psf_bank(dir: &Path, bank: &PsfBank) -> Result<()> {
    let mut s = format!(
        "# bins={} kernel={} fingerprint={}\n# bin channel depth_m wavelength_m file\n",
        bank.len(),
        bank.kernel_size(),
        bank.fingerprint()
    );
    for bin in 0..bank.len() {
        for c in 0..3 {
            let psf = bank.get(bin, c);
            let file = format!("psf_{bin:03}_{c}.pfm");
            write_pfm(&dir.join(&file), &[&psf.kernel])?;
            let _ = writeln!(s, "{bin} {c} {} {} {file}", psf.depth, psf.wavelength);
        }
    }
    write_text(&dir.join(BANK_INDEX), &s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BankIndexEntry {
    pub bin: usize,
    pub channel: usize,
    pub depth: f64,
    pub wavelength: f64,
    pub file: String,
}

pub fn read_psf_bank_index(dir: &Path) -> Result<Vec<BankIndexEntry>> {
    let path = dir.join(BANK_INDEX);
    let text = read_text(&path)?;
    content_lines(&text)
        .map(|(ln, line)| {
            let t: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::format(&path, format!("line {ln}: expected `bin channel depth wavelength file`"));
            if t.len() != 5 {
                return Err(bad());
            }
            Ok(BankIndexEntry {
                bin: t[0].parse().map_err(|_| bad())?,
                channel: t[1].parse().map_err(|_| bad())?,
                depth: t[2].parse().map_err(|_| bad())?,
                wavelength: t[3].parse().map_err(|_| bad())?,
                file: t[4].to_string(),
            })
        })
        .collect()
}

/// Reloads an exported bank. Kernels pass through f32 on disk.
pub fn import_psf_bank(dir: &Path) -> Result<PsfBank> {
    let mut entries = read_psf_bank_index(dir)?;
    entries.sort_by_key(|e| (e.bin, e.channel));
    let bins = entries.len() / 3;
    if entries.len() % 3 != 0
        || entries.iter().enumerate().any(|(i, e)| e.bin != i / 3 || e.channel != i % 3)
    {
        return Err(Error::format(dir.join(BANK_INDEX), "index must list 3 channels per bin"));
    }
    let depths: Vec<f64> = (0..bins).map(|b| entries[b * 3].depth).collect();
    let psfs = entries
        .into_iter()
        .map(|e| {
            let mut planes = read_pfm(&dir.join(&e.file))?;
            Ok(Psf {
                depth: e.depth,
                wavelength: e.wavelength,
                kernel: planes.swap_remove(0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PsfBank::from_parts(depths, psfs)
}

pub fn format_depth_bins(bins: &DepthBins) -> String {
    let spacing = match bins.spacing {
        BinSpacing::Inverse => "inverse",
        BinSpacing::Linear => "linear",
    };
    let centers: Vec<String> = bins.centers().iter().map(|c| c.to_string()).collect();
    format!(
        "count={}\nnear={}\nfar={}\nspacing={spacing}\ncenters={}\n",
        bins.count(),
        bins.near,
        bins.far,
        centers.join(",")
    )
}

pub fn write_depth_bins(path: &Path, bins: &DepthBins) -> Result<()> {
    write_text(path, &format_depth_bins(bins))
}

pub fn read_depth_bins(path: &Path) -> Result<DepthBins> {
    let text = read_text(path)?;
    let (mut near, mut far, mut spacing, mut centers) = (None, None, BinSpacing::Inverse, None);
    for (ln, line) in content_lines(&text) {
        let bad = |m: &str| Error::format(path, format!("line {ln}: {m}"));
        let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("bad number"));
        match k.trim() {
            "count" => {}
            "near" => near = Some(num(v)?),
            "far" => far = Some(num(v)?),
            "spacing" => spacing = v.trim().parse()?,
            "centers" => centers = Some(v.split(',').map(num).collect::<Result<Vec<_>>>()?),
            other => return Err(bad(&format!("unknown key {other:?}"))),
        }
    }
    let mut bins = DepthBins::from_centers(centers.ok_or_else(|| Error::format(path, "no centers"))?)?;
    bins.near = near.unwrap_or(bins.near);
    bins.far = far.unwrap_or(bins.far);
    bins.spacing = spacing;
    Ok(bins)
}

pub fn format_tum(traj: &Trajectory) -> String {
    let mut s = String::new();
    for p in traj.poses() {
        let q = p.quaternion_xyzw();
        let t = p.translation;
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            p.timestamp, t.x, t.y, t.z, q[0], q[1], q[2], q[3]
        );
    }
    s
}

pub fn write_tum(path: &Path, traj: &Trajectory) -> Result<()> {
    write_text(path, &format_tum(traj))
}

pub fn parse_tum(path: &Path, text: &str) -> Result<Trajectory> {
    let mut poses = Vec::new();
    for (ln, line) in content_lines(text) {
        let v = parse_floats(path, ln, line)?;
        if v.len() != 8 {
            return Err(Error::format(path, format!("line {ln}: expected 8 values, got {}", v.len())));
        }
        let pose = Pose::from_tum(v[0], [v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]])
            .map_err(|e| Error::format(path, format!("line {ln}: {e}")))?;
        poses.push(pose);
    }
    Trajectory::new(poses).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_tum(path: &Path) -> Result<Trajectory> {
    parse_tum(path, &read_text(path)?)
}

/// Pinhole intrinsics plus the depth PNG scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsicsFile {
    pub intrinsics: Intrinsics,
    pub depth_scale: f64,
}

pub fn write_intrinsics(path: &Path, k: &Intrinsics, depth_scale: f64) -> Result<()> {
    write_text(
        path,
        &format!(
            "fx={}\nfy={}\ncx={}\ncy={}\ndepth_scale={depth_scale}\n",
            k.fx, k.fy, k.cx, k.cy
        ),
    )
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsicsFile> {
    let text = read_text(path)?;
    let mut vals = [None; 5];
    const KEYS: [&str; 5] = ["fx", "fy", "cx", "cy", "depth_scale"];
    for (ln, line) in content_lines(&text) {
        let bad = |m: &str| Error::format(path, format!("line {ln}: {m}"));
        let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let i = KEYS
            .iter()
            .position(|&n| n == k.trim())
            .ok_or_else(|| bad(&format!("unknown key {:?}", k.trim())))?;
        vals[i] = Some(v.trim().parse::<f64>().map_err(|_| bad("bad number"))?);
    }
    let get = |i: usize| vals[i].ok_or_else(|| Error::format(path, format!("missing {}", KEYS[i])));
    let depth_scale = vals[4].unwrap_or(super::png::DEFAULT_DEPTH_SCALE);
    if !(depth_scale > 0.0) {
        return Err(Error::format(path, "depth_scale must be > 0"));
    }
    Ok(CameraIntrinsicsFile {
        intrinsics: Intrinsics::new(get(0)?, get(1)?, get(2)?, get(3)?)?,
        depth_scale,
    })
}
