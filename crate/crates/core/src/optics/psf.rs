//! Fourier-optics PSF synthesis.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::camera::CameraConfig;
use super::mask::{phase_from_height, ApertureAmplitude, PhaseMask};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::Plane;

/// Geometry of the sampled pupil plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PupilGrid {
    /// Samples per side.
    pub samples: usize,
    /// Physical side length covered by the samples, meters.
    pub extent: f64,
    /// Radius of the transmitting pupil, meters.
    pub radius: f64,
}

impl PupilGrid {
    /// The grid spans the mask; the pupil is the lens aperture clipped to it.
    pub fn new(mask: &PhaseMask, config: &CameraConfig) -> Self {
        let extent = mask.extent();
        PupilGrid {
            samples: config.pupil_samples_for(mask.grid()),
            extent,
            radius: config.lens_aperture().min(extent) / 2.0,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.samples as f64
    }

    /// Normalized pupil radius of sample `(x, y)`; 1 at the pupil rim.
    pub fn rho(&self, x: usize, y: usize) -> f64 {
        let n = self.samples as f64;
        let half = self.extent / 2.0;
        let u = ((x as f64 + 0.5) / n * 2.0 - 1.0) * half;
        let v = ((y as f64 + 0.5) / n * 2.0 - 1.0) * half;
        u.hypot(v) / self.radius
    }
}

/// Pupil defocus phase `(πR²/λ)(1/z_f − 1/d)ρ²`, zero outside the pupil.
pub fn defocus_phase(
    depth: f64,
    wavelength: f64,
    config: &CameraConfig,
    pupil: &PupilGrid,
) -> Result<Plane> {
    if !(depth > 0.0) {
        return Err(Error::InvalidArgument(format!("depth must be > 0, got {depth}")));
    }
    if !(wavelength > 0.0) {
        return Err(Error::InvalidArgument("wavelength must be > 0".into()));
    }
    let r = pupil.radius;
    let k = PI * r * r / wavelength * (1.0 / config.focus_distance - 1.0 / depth);
    Ok(Plane::from_fn(pupil.samples, pupil.samples, |x, y| {
        let rho = pupil.rho(x, y);
        if rho <= 1.0 {
            k * rho * rho
        } else {
            0.0
        }
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Psf {
    pub depth: f64,
    pub wavelength: f64,
    pub kernel: Plane,
}

/// Fine-to-sensor box resampling: row `i` holds the overlap fractions of the
/// fine samples starting at `start[i]` with sensor pixel `i`.
struct Resampler {
    start: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl Resampler {
    fn new(crop: usize, n: usize, pitch: f64, dx: f64) -> Self {
        let half = crop as f64 / 2.0;
        let mut start = Vec::with_capacity(crop);
        let mut weights = Vec::with_capacity(crop);
        for i in 0..crop {
            let lo = (i as f64 - half) * pitch;
            let hi = lo + pitch;
            let mut s = None;
            let mut w = Vec::new();
            for k in 0..n {
                let flo = (k as f64 - n as f64 / 2.0 - 0.5) * dx;
                let fhi = flo + dx;
                let overlap = fhi.min(hi) - flo.max(lo);
                if overlap > 0.0 {
                    s.get_or_insert(k);
                    w.push(overlap / dx);
                } else if s.is_some() {
                    break;
                }
            }
            start.push(s.unwrap_or(0));
            weights.push(w);
        }
        Resampler { start, weights }
    }

    /// `W · I · Wᵀ` for a row-major `n × n` intensity.
    fn apply(&self, intensity: &[f64], n: usize) -> Plane {
        let crop = self.start.len();
        // T = I · Wᵀ, n rows × crop columns
        let mut t = vec![0.0; n * crop];
        for y in 0..n {
            let row = &intensity[y * n..(y + 1) * n];
            for b in 0..crop {
                let s = self.start[b];
                t[y * crop + b] = self.weights[b]
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * row[s + i])
                    .sum();
            }
        }
        Plane::from_fn(crop, crop, |b, a| {
            let s = self.start[a];
            self.weights[a]
                .iter()
                .enumerate()
                .map(|(i, w)| w * t[(s + i) * crop + b])
                .sum()
        })
    }
}

fn check_geometry(
    mask: &PhaseMask,
    amplitude: &ApertureAmplitude,
    config: &CameraConfig,
    wavelength: f64,
) -> Result<(PupilGrid, f64)> {
    config.validate()?;
    let pupil = PupilGrid::new(mask, config);
    let m = pupil.samples;
    if m < mask.grid() {
        return Err(Error::InvalidConfiguration(format!(
            "pupil_samples {m} smaller than the mask grid {}",
            mask.grid()
        )));
    }
    if amplitude.samples() != m {
        return Err(Error::InvalidConfiguration(format!(
            "amplitude grid has {} samples, pupil grid has {m}",
            amplitude.samples()
        )));
    }
    let n = config.fft_size;
    if n < 2 * m {
        return Err(Error::InvalidConfiguration(format!(
            "fft_size {n} must be at least twice the pupil samples ({m})"
        )));
    }
    let dx = wavelength * config.sensor_distance() / (n as f64 * pupil.spacing());
    let need = (config.psf_crop as f64 / 2.0) * config.pixel_pitch;
    let have = (n as f64 / 2.0 - 0.5) * dx;
    if need > have {
        return Err(Error::InvalidConfiguration(format!(
            "simulated field {:.3e} m does not cover the {}-pixel crop ({:.3e} m); raise fft_size or pupil sampling density",
            have, config.psf_crop, need
        )));
    }
    Ok((pupil, dx))
}

/// Sensor-sampled `|FT(A·exp(iφ))|²` before normalization.
pub fn simulate_psf_unnormalized(
    depth: f64,
    channel: usize,
    mask: &PhaseMask,
    amplitude: &ApertureAmplitude,
    config: &CameraConfig,
) -> Result<Plane> {
    if channel > 2 {
        return Err(Error::InvalidArgument(format!("channel must be 0..2, got {channel}")));
    }
    let wavelength = config.wavelengths[channel];
    let (pupil, dx) = check_geometry(mask, amplitude, config, wavelength)?;
    let m = pupil.samples;
    let n = config.fft_size;
    let phi_d = defocus_phase(depth, wavelength, config, &pupil)?;
    let phi_m = phase_from_height(mask, wavelength, m)?;
    let a = amplitude.values();

    let mut field = vec![Complex64::new(0.0, 0.0); n * n];
    let o = (n - m) / 2;
    for y in 0..m {
        for x in 0..m {
            let amp = a.get(x, y);
            if amp != 0.0 {
                let p = phi_d.get(x, y) + phi_m.get(x, y);
                field[(o + y) * n + o + x] = Complex64::from_polar(amp, p);
            }
        }
    }
    Fft2::new(n, n).forward(&mut field);

    // fftshift: zero frequency lands at (n/2, n/2)
    let h = n / 2;
    let mut intensity = vec![0.0; n * n];
    for y in 0..n {
        let sy = (y + h) % n;
        for x in 0..n {
            intensity[y * n + x] = field[sy * n + (x + h) % n].norm_sqr();
        }
    }
    let resampler = Resampler::new(config.psf_crop, n, config.pixel_pitch, dx);
    Ok(resampler.apply(&intensity, n))
}

pub fn simulate_psf(
    depth: f64,
    channel: usize,
    mask: &PhaseMask,
    amplitude: &ApertureAmplitude,
    config: &CameraConfig,
) -> Result<Psf> {
    let raw = simulate_psf_unnormalized(depth, channel, mask, amplitude, config)?;
    let s = raw.sum();
    if !(s > 0.0) {
        return Err(Error::InvalidConfiguration(
            "aperture transmits no light".into(),
        ));
    }
    Ok(Psf {
        depth,
        wavelength: config.wavelengths[channel],
        kernel: raw.map(|v| (v / s).max(0.0)),
    })
}

/// PSFs for every (depth bin, channel) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PsfBank {
    depth_bins: Vec<f64>,
    psfs: Vec<Psf>,
    fingerprint: String,
}

impl PsfBank {
    /// Assembles a bank from precomputed PSFs, `psfs[bin * 3 + channel]`.
    pub fn from_parts(depth_bins: Vec<f64>, psfs: Vec<Psf>) -> Result<Self> {
        check_bins(&depth_bins)?;
        if psfs.len() != depth_bins.len() * 3 {
            return Err(Error::InvalidArgument(format!(
                "expected {} PSFs, got {}",
                depth_bins.len() * 3,
                psfs.len()
            )));
        }
        let side = psfs[0].kernel.dims();
        if psfs
            .iter()
            .any(|p| p.kernel.dims() != side || side.0 != side.1 || side.0 % 2 == 0)
        {
            return Err(Error::InvalidArgument(
                "PSF kernels must share one odd square size".into(),
            ));
        }
        let fingerprint = fingerprint(&depth_bins, &psfs);
        Ok(PsfBank {
            depth_bins,
            psfs,
            fingerprint,
        })
    }

    pub fn depth_bins(&self) -> &[f64] {
        &self.depth_bins
    }

    pub fn len(&self) -> usize {
        self.depth_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth_bins.is_empty()
    }

    pub fn get(&self, bin: usize, channel: usize) -> &Psf {
        &self.psfs[bin * 3 + channel]
    }

    pub fn kernel(&self, bin: usize, channel: usize) -> &Plane {
        &self.get(bin, channel).kernel
    }

    pub fn psfs(&self) -> &[Psf] {
        &self.psfs
    }

    pub fn kernel_size(&self) -> usize {
        self.psfs[0].kernel.width()
    }

    /// Hex SHA-256 over bins and kernel values; identifies the bank in
    /// rendered-frame provenance.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

fn fingerprint(bins: &[f64], psfs: &[Psf]) -> String {
    let mut h = Sha256::new();
    for b in bins {
        h.update(b.to_le_bytes());
    }
    for p in psfs {
        h.update(p.wavelength.to_le_bytes());
        for v in p.kernel.data() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn check_bins(bins: &[f64]) -> Result<()> {
    if bins.is_empty() {
        return Err(Error::InvalidArgument("depth bins are empty".into()));
    }
    if bins.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument("depth bins must be positive".into()));
    }
    if bins.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "depth bins must be strictly increasing".into(),
        ));
    }
    Ok(())
}

pub fn build_psf_bank(
    mask: &PhaseMask,
    amplitude: &ApertureAmplitude,
    config: &CameraConfig,
    depth_bins: &[f64],
) -> Result<PsfBank> {
    check_bins(depth_bins)?;
    let psfs = crate::par::map_range(depth_bins.len() * 3, |i| {
        simulate_psf(depth_bins[i / 3], i % 3, mask, amplitude, config)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    PsfBank::from_parts(depth_bins.to_vec(), psfs)
}
