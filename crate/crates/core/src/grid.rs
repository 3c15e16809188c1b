//! Row-major floating-point image planes.

use crate::error::{Error, Result};

/// A single-channel image, row-major, `data[y * width + x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "plane data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with coordinates clamped to the border (replicate padding).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// integers), replicate border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let a = self.get_clamped(xi, yi);
        let b = self.get_clamped(xi + 1, yi);
        let c = self.get_clamped(xi, yi + 1);
        let d = self.get_clamped(xi + 1, yi + 1);
        (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        assert_eq!(self.dims(), other.dims(), "plane dimensions differ");
        Plane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Copy of the rectangle `[x0, x0+w) × [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Plane {
        Plane::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Maximum absolute difference over the rectangle that excludes a
    /// `margin`-wide border.
    pub fn max_abs_diff_interior(&self, other: &Plane, margin: usize) -> f64 {
        assert_eq!(self.dims(), other.dims());
        let mut m = 0.0f64;
        for y in margin..self.height.saturating_sub(margin) {
            for x in margin..self.width.saturating_sub(margin) {
                m = m.max((self.get(x, y) - other.get(x, y)).abs());
            }
        }
        m
    }
}

/// A three-channel (R, G, B) linear-light image.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub channels: [Plane; 3],
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage {
            channels: [
                Plane::new(width, height),
                Plane::new(width, height),
                Plane::new(width, height),
            ],
        }
    }

    pub fn from_planes(r: Plane, g: Plane, b: Plane) -> Result<Self> {
        if r.dims() != g.dims() || r.dims() != b.dims() {
            return Err(Error::InvalidArgument(
                "rgb channel dimensions differ".into(),
            ));
        }
        Ok(RgbImage {
            channels: [r, g, b],
        })
    }

    /// Same plane replicated into every channel.
    pub fn gray(plane: Plane) -> Self {
        RgbImage {
            channels: [plane.clone(), plane.clone(), plane],
        }
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    /// Luma with Rec. 601 weights.
    pub fn luma(&self) -> Plane {
        let [r, g, b] = &self.channels;
        let data = r
            .data()
            .iter()
            .zip(g.data())
            .zip(b.data())
            .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect();
        Plane::from_vec(r.width(), r.height(), data).expect("matching dims")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> RgbImage {
        RgbImage {
            channels: [
                self.channels[0].map(f),
                self.channels[1].map(f),
                self.channels[2].map(f),
            ],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.channels
            .iter()
            .all(|p| p.data().iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_access_replicates_edges() {
        let p = Plane::from_fn(3, 2, |x, y| (x + 10 * y) as f64);
        assert_eq!(p.get_clamped(-5, 0), 0.0);
        assert_eq!(p.get_clamped(7, 1), 12.0);
        assert_eq!(p.get_clamped(1, -1), 1.0);
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let p = Plane::from_fn(4, 4, |x, y| (x * y) as f64);
        assert_eq!(p.sample_bilinear(2.0, 3.0), 6.0);
        assert!((p.sample_bilinear(1.5, 1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn luma_weights_sum_to_one() {
        let img = RgbImage::gray(Plane::filled(2, 2, 0.5));
        assert!(img.luma().data().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Plane::from_vec(2, 2, vec![0.0; 3]).is_err());
    }
}
