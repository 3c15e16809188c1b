use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lens, sensor and sampling parameters of the simulated camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    /// Meters.
    pub focal_length: f64,
    pub f_number: f64,
    /// Distance of the in-focus plane, meters.
    pub focus_distance: f64,
    /// Sensor pixel pitch, meters.
    pub pixel_pitch: f64,
    pub sensor_resolution: (u32, u32),
    /// Per-channel wavelengths (R, G, B), meters.
    pub wavelengths: [f64; 3],
    /// Pupil-plane samples across the mask; `None` means 4× the mask grid.
    pub pupil_samples: Option<usize>,
    /// Side of the square FFT used for propagation.
    pub fft_size: usize,
    /// Output PSF side length in sensor pixels (odd).
    pub psf_crop: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            focal_length: 0.05,
            f_number: 1.8,
            focus_distance: 0.85,
            pixel_pitch: 9.4e-6,
            sensor_resolution: (1344, 894),
            wavelengths: [610e-9, 530e-9, 470e-9],
            pupil_samples: None,
            fft_size: 512,
            psf_crop: 65,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Invariant {
                key: format!("camera.{key}"),
                message: message.to_string(),
            })
        };
        if !(self.focal_length > 0.0) {
            return bad("focal_length", "must be > 0");
        }
        if !(self.f_number > 0.0) {
            return bad("f_number", "must be > 0");
        }
        if !(self.focus_distance > self.focal_length) {
            return bad("focus_distance", "must exceed the focal length");
        }
        if !(self.pixel_pitch > 0.0) {
            return bad("pixel_pitch", "must be > 0");
        }
        if self.wavelengths.iter().any(|&w| !(w > 0.0)) {
            return bad("wavelengths", "all wavelengths must be > 0");
        }
        if self.psf_crop < 3 || self.psf_crop % 2 == 0 {
            return bad("psf_crop", "must be odd and >= 3");
        }
        if self.fft_size < 8 || self.fft_size % 2 == 1 {
            return bad("fft_size", "must be even and >= 8");
        }
        if self.pupil_samples == Some(0) {
            return bad("pupil_samples", "must be positive");
        }
        Ok(())
    }

    /// Distance from lens to sensor when focused at `focus_distance`.
    pub fn sensor_distance(&self) -> f64 {
        self.focal_length * self.focus_distance / (self.focus_distance - self.focal_length)
    }

    /// Clear aperture diameter of the lens.
    pub fn lens_aperture(&self) -> f64 {
        self.focal_length / self.f_number
    }

    pub fn pupil_samples_for(&self, mask_grid: usize) -> usize {
        self.pupil_samples.unwrap_or(4 * mask_grid)
    }
}
