use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use super::atomic::write_atomic;
use crate::error::{Error, Result};
use crate::grid::{Plane, RgbImage};

/// Units per meter in 16-bit depth PNGs.
pub const DEFAULT_DEPTH_SCALE: f64 = 5000.0;

pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn encode(path: &Path, img: DynamicImage) -> Result<()> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, buf.get_ref())
}

/// 8- or 16-bit PNG (gray or color, alpha dropped) as linear RGB in [0, 1].
pub fn read_rgb_png(path: &Path) -> Result<RgbImage> {
    let img = open(path)?.into_rgb16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = RgbImage::new(w, h);
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            let v = srgb_to_linear(px[c] as f64 / 65535.0);
            out.channels[c].set(x as usize, y as usize, v);
        }
    }
    Ok(out)
}

/// 16-bit sRGB PNG from linear intensities (clamped to [0, 1]).
pub fn write_rgb_png(path: &Path, image: &RgbImage) -> Result<()> {
    let (w, h) = image.dims();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let q = |c: usize| {
            (linear_to_srgb(image.channels[c].get(x as usize, y as usize)) * 65535.0).round() as u16
        };
        Rgb([q(0), q(1), q(2)])
    });
    encode(path, DynamicImage::ImageRgb16(buf))
}

/// Depth in meters from a 16-bit PNG; zero stays zero (invalid).
pub fn read_depth_png(path: &Path, depth_scale: f64) -> Result<Plane> {
    let img = open(path)?;
    let img = match img {
        DynamicImage::ImageLuma16(b) => b,
        other => other.into_luma16(),
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Plane::from_fn(w, h, |x, y| {
        img.get_pixel(x as u32, y as u32)[0] as f64 / depth_scale
    }))
}

/// Invalid (non-finite or non-positive) depths are written as 0.
pub fn write_depth_png(path: &Path, depth: &Plane, depth_scale: f64) -> Result<()> {
    let (w, h) = depth.dims();
    let mut overflow = false;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let d = depth.get(x as usize, y as usize);
        if !(d.is_finite() && d > 0.0) {
            return Luma([0]);
        }
        let v = (d * depth_scale).round();
        if v > u16::MAX as f64 {
            overflow = true;
        }
        Luma([v.clamp(1.0, u16::MAX as f64) as u16])
    });
    if overflow {
        log::warn!("{}: depths beyond the 16-bit range were clamped", path.display());
    }
    encode(path, DynamicImage::ImageLuma16(buf))
}
