//! Phase masks (thin transparent plates) and pupil amplitude.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::zernike::zernike_eval;
use crate::error::{Error, Result};
use crate::grid::Plane;

/// Maximum plate thickness variation, meters.
pub const MAX_HEIGHT: f64 = 2e-6;

pub const DEFAULT_GRID_PITCH: f64 = 135e-6;

pub const DEFAULT_GRID: usize = 23;

/// Default mask surface in Noll order, meters of sag. Astigmatism flips
/// orientation across focus, which separates near and far defocus.
pub const DEFAULT_ZERNIKE: [f64; 10] = [
    0.0, 0.0, 0.0, 0.0, 0.25e-6, 0.10e-6, 0.10e-6, 0.0, 0.0, 0.08e-6,
];

const HEIGHT_TOL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RefractiveIndex {
    Constant(f64),
    /// `n(λ) = a + b / λ²`, λ in meters.
    Cauchy { a: f64, b: f64 },
}

impl RefractiveIndex {
    pub fn at(&self, wavelength: f64) -> f64 {
        match *self {
            RefractiveIndex::Constant(n) => n,
            RefractiveIndex::Cauchy { a, b } => a + b / (wavelength * wavelength),
        }
    }
}

impl Default for RefractiveIndex {
    fn default() -> Self {
        RefractiveIndex::Constant(1.5)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMask {
    height_map: Plane,
    grid_pitch: f64,
    pub refractive_index: RefractiveIndex,
    zernike: Option<Vec<f64>>,
}

impl PhaseMask {
    pub fn from_height_map(height_map: Plane, grid_pitch: f64) -> Result<Self> {
        let (w, h) = height_map.dims();
        if w != h || w == 0 {
            return Err(Error::InvalidArgument(format!(
                "height map must be square and nonempty, got {w}x{h}"
            )));
        }
        if !(grid_pitch > 0.0) {
            return Err(Error::InvalidArgument("grid pitch must be > 0".into()));
        }
        if let Some(&bad) = height_map
            .data()
            .iter()
            .find(|&&v| !(v >= -HEIGHT_TOL && v <= MAX_HEIGHT + HEIGHT_TOL))
        {
            return Err(Error::OutOfRange(format!(
                "height {bad:e} m outside [0, {MAX_HEIGHT:e}] m"
            )));
        }
        Ok(PhaseMask {
            height_map,
            grid_pitch,
            refractive_index: RefractiveIndex::default(),
            zernike: None,
        })
    }

    pub fn from_zernike(coeffs: &[f64], grid: usize, grid_pitch: f64) -> Result<Self> {
        let height_map = height_from_zernike(coeffs, grid, grid_pitch)?;
        let mut mask = Self::from_height_map(height_map, grid_pitch)?;
        mask.zernike = Some(coeffs.to_vec());
        Ok(mask)
    }

    /// Flat plate: no phase modulation.
    pub fn zero(grid: usize, grid_pitch: f64) -> Self {
        PhaseMask {
            height_map: Plane::new(grid, grid),
            grid_pitch,
            refractive_index: RefractiveIndex::default(),
            zernike: None,
        }
    }

    pub fn default_coded(grid: usize) -> Result<Self> {
        Self::from_zernike(&DEFAULT_ZERNIKE, grid, DEFAULT_GRID_PITCH)
    }

    pub fn with_refractive_index(mut self, n: RefractiveIndex) -> Self {
        self.refractive_index = n;
        self
    }

    pub fn grid(&self) -> usize {
        self.height_map.width()
    }

    pub fn grid_pitch(&self) -> f64 {
        self.grid_pitch
    }

    /// Physical side length of the mask, meters.
    pub fn extent(&self) -> f64 {
        self.grid() as f64 * self.grid_pitch
    }

    pub fn height_map(&self) -> &Plane {
        &self.height_map
    }

    pub fn zernike(&self) -> Option<&[f64]> {
        self.zernike.as_deref()
    }
}

/// Samples `Σ a_j Z_j` at the cell centers of an `grid × grid` map covering
/// the unit disk, shifts the in-disk minimum to zero and zeroes cells outside
/// the disk.
pub fn height_from_zernike(coeffs: &[f64], grid: usize, _pitch: f64) -> Result<Plane> {
    if grid < 3 {
        return Err(Error::InvalidArgument(format!(
            "mask grid must be >= 3, got {grid}"
        )));
    }
    let g = grid as f64;
    let mut raw = Plane::new(grid, grid);
    let mut inside = vec![false; grid * grid];
    for y in 0..grid {
        for x in 0..grid {
            let u = (x as f64 + 0.5) / g * 2.0 - 1.0;
            let v = (y as f64 + 0.5) / g * 2.0 - 1.0;
            let rho = u.hypot(v);
            if rho <= 1.0 {
                let theta = v.atan2(u);
                let mut h = 0.0;
                for (j, &a) in coeffs.iter().enumerate() {
                    if a != 0.0 {
                        h += a * zernike_eval(j + 1, rho, theta)?;
                    }
                }
                raw.set(x, y, h);
                inside[y * grid + x] = true;
            }
        }
    }
    let min = raw
        .data()
        .iter()
        .zip(&inside)
        .filter(|(_, &i)| i)
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    let mut out = Plane::new(grid, grid);
    let mut span = 0.0f64;
    for i in 0..grid * grid {
        if inside[i] {
            let h = raw.data()[i] - min;
            span = span.max(h);
            out.data_mut()[i] = h;
        }
    }
    if span > MAX_HEIGHT + HEIGHT_TOL {
        return Err(Error::OutOfRange(format!(
            "Zernike surface spans {span:e} m, limit is {MAX_HEIGHT:e} m; rescale the coefficients"
        )));
    }
    Ok(out)
}

/// Mask phase `(2π/λ)(n(λ) − 1) h` on a `samples × samples` pupil grid,
/// nearest-neighbor upsampled from the mask cells.
pub fn phase_from_height(mask: &PhaseMask, wavelength: f64, samples: usize) -> Result<Plane> {
    if !(wavelength > 0.0) {
        return Err(Error::InvalidArgument("wavelength must be > 0".into()));
    }
    let grid = mask.grid();
    let k = 2.0 * PI / wavelength * (mask.refractive_index.at(wavelength) - 1.0);
    let hm = mask.height_map();
    Ok(Plane::from_fn(samples, samples, |x, y| {
        let cx = x * grid / samples;
        let cy = y * grid / samples;
        k * hm.get(cx, cy)
    }))
}

/// Pupil amplitude transmission on the pupil sampling grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ApertureAmplitude {
    values: Plane,
}

impl ApertureAmplitude {
    pub fn new(values: Plane) -> Result<Self> {
        if values.width() != values.height() {
            return Err(Error::InvalidArgument("amplitude grid must be square".into()));
        }
        if values.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::OutOfRange("amplitude values must lie in [0, 1]".into()));
        }
        Ok(ApertureAmplitude { values })
    }

    /// Binary disk whose diameter is `diameter_ratio` times the grid side.
    pub fn circular(samples: usize, diameter_ratio: f64) -> Self {
        let n = samples as f64;
        let r2 = diameter_ratio * diameter_ratio;
        let values = Plane::from_fn(samples, samples, |x, y| {
            let u = (x as f64 + 0.5) / n * 2.0 - 1.0;
            let v = (y as f64 + 0.5) / n * 2.0 - 1.0;
            if u * u + v * v <= r2 {
                1.0
            } else {
                0.0
            }
        });
        ApertureAmplitude { values }
    }

    /// The lens aperture clipped to the mask extent, sampled for `mask`.
    pub fn default_for(mask: &PhaseMask, camera: &super::CameraConfig) -> Self {
        let samples = camera.pupil_samples_for(mask.grid());
        let ratio = (camera.lens_aperture() / mask.extent()).min(1.0);
        Self::circular(samples, ratio)
    }

    pub fn values(&self) -> &Plane {
        &self.values
    }

    pub fn samples(&self) -> usize {
        self.values.width()
    }

    /// Multiplies every value by `c`; fails if the result leaves [0, 1].
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.map(|v| v * c))
    }

    /// Diameter of the transmitting disk as a fraction of the grid side,
    /// measured from the outermost nonzero sample along the center row.
    pub fn diameter_ratio(&self) -> f64 {
        let n = self.samples();
        let y = n / 2;
        let mut r = 0.0f64;
        for x in 0..n {
            if self.values.get(x, y) > 0.0 {
                let u = ((x as f64 + 0.5) / n as f64 * 2.0 - 1.0).abs() + 1.0 / n as f64;
                r = r.max(u);
            }
        }
        r.min(1.0)
    }
}
