//! Portable float maps: little-endian f32, rows stored bottom to top.

use std::path::Path;

use super::atomic::write_atomic;
use crate::error::{Error, Result};
use crate::grid::{Plane, RgbImage};

/// Writes one (gray) or three (color) planes of equal size.
pub fn write_pfm(path: &Path, channels: &[&Plane]) -> Result<()> {
    let tag = match channels.len() {
        1 => "Pf",
        3 => "PF",
        n => return Err(Error::InvalidArgument(format!("PFM needs 1 or 3 channels, got {n}"))),
    };
    let (w, h) = channels[0].dims();
    if channels.iter().any(|c| c.dims() != (w, h)) {
        return Err(Error::InvalidArgument("PFM channels differ in size".into()));
    }
    let mut out = format!("{tag}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * channels.len() * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            for c in channels {
                out.extend_from_slice(&(c.get(x, y) as f32).to_le_bytes());
            }
        }
    }
    write_atomic(path, &out)
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok().filter(|s| !s.is_empty())
}

pub fn read_pfm(path: &Path) -> Result<Vec<Plane>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::format(path, m);
    let mut pos = 0;
    let channels = match next_token(&bytes, &mut pos) {
        Some("PF") => 3,
        Some("Pf") => 1,
        _ => return Err(bad("missing PF/Pf tag")),
    };
    let mut num = |what: &str| -> Result<f64> {
        next_token(&bytes, &mut pos)
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| bad(&format!("bad {what}")))
    };
    let w = num("width")? as usize;
    let h = num("height")? as usize;
    let scale = num("scale")?;
    if scale == 0.0 || w == 0 || h == 0 {
        return Err(bad("bad header values"));
    }
    // exactly one whitespace byte separates the header from the data
    pos += 1;
    let need = w * h * channels * 4;
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| bad("truncated pixel data"))?;
    let little = scale < 0.0;
    let mut planes = vec![Plane::new(w, h); channels];
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let c = i % channels;
        let p = i / channels;
        planes[c].set(p % w, h - 1 - p / w, v as f64);
    }
    Ok(planes)
}

pub fn write_rgb_pfm(path: &Path, image: &RgbImage) -> Result<()> {
    let [r, g, b] = &image.channels;
    write_pfm(path, &[r, g, b])
}

pub fn read_rgb_pfm(path: &Path) -> Result<RgbImage> {
    let mut planes = read_pfm(path)?;
    match planes.len() {
        3 => {
            let b = planes.pop().expect("3");
            let g = planes.pop().expect("2");
            let r = planes.pop().expect("1");
            RgbImage::from_planes(r, g, b)
        }
        _ => Ok(RgbImage::gray(planes.swap_remove(0))),
    }
}
