//! Classical depth from a single coded frame by PSF-bank hypothesis testing.
//!
//! For each bin `d` and channel, the padded, mean-removed image spectrum `Y`
//! is modeled as Gaussian with power `P_d = S·|H_d|² + σ²`, where `S` is a
//! band-wise texture power fitted to the observed spectrum for that kernel
//! and `σ²` a noise floor estimated from high frequencies. The local cost is
//! the whitened residual energy `G_d · box(q_d²)`, `q_d = F⁻¹[Y / √P_d]`,
//! scaled by the geometric mean `G_d` of `P_d` so hypotheses with different
//! spectra are comparable.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{box_filter, PaddedFft};
use crate::grid::{Plane, RgbImage};
use crate::optics::PsfBank;
use crate::render::DepthBins;

pub const DEFAULT_WINDOW: usize = 21;
pub const DEFAULT_SNR: f64 = 1e4;

const BANDS: usize = 8;
const MAX_RADIUS: f64 = 0.7072;
const OUTER_RADIUS: f64 = 0.5;
const EXTRA_MARGIN: usize = 8;

/// Per-pixel costs, one plane per depth bin (ascending depth).
#[derive(Clone, Debug, PartialEq)]
pub struct CostVolume {
    planes: Vec<Plane>,
}

impl CostVolume {
    pub fn new(planes: Vec<Plane>) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::EmptyInput("cost volume has no bins".into()));
        }
        let dims = planes[0].dims();
        if planes.iter().any(|p| p.dims() != dims) {
            return Err(Error::InvalidArgument("cost planes differ in size".into()));
        }
        Ok(CostVolume { planes })
    }

    pub fn bins(&self) -> usize {
        self.planes.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    pub fn plane(&self, bin: usize) -> &Plane {
        &self.planes[bin]
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn add(&self, other: &CostVolume) -> Result<CostVolume> {
        if self.bins() != other.bins() || self.dims() != other.dims() {
            return Err(Error::InvalidArgument("cost volume shapes differ".into()));
        }
        CostVolume::new(
            self.planes
                .iter()
                .zip(&other.planes)
                .map(|(a, b)| a.zip_map(b, |x, y| x + y))
                .collect(),
        )
    }
}

/// Frequency layout of the padded transform.
struct Spectral {
    plan: PaddedFft,
    band: Vec<usize>,
    band_count: [f64; BANDS],
    outer: Vec<bool>,
}

impl Spectral {
    fn new(width: usize, height: usize, kernel: usize) -> Self {
        let plan = PaddedFft::new(width, height, kernel / 2 + EXTRA_MARGIN);
        let (pw, ph) = (plan.fft().width(), plan.fft().height());
        let freq = |k: usize, n: usize| {
            let k = if k <= (n - 1) / 2 { k as f64 } else { k as f64 - n as f64 };
            k / n as f64
        };
        let mut band = Vec::with_capacity(pw * ph);
        let mut outer = Vec::with_capacity(pw * ph);
        let mut band_count = [0.0; BANDS];
        let step = MAX_RADIUS / BANDS as f64;
        for y in 0..ph {
            let fy = freq(y, ph);
            for x in 0..pw {
                let r = freq(x, pw).hypot(fy);
                let b = ((r / step).floor() as usize).min(BANDS - 1);
                band.push(b);
                band_count[b] += 1.0;
                outer.push(r > OUTER_RADIUS);
            }
        }
        Spectral {
            plan,
            band,
            band_count,
            outer,
        }
    }

    fn band_mean(&self, values: &[f64]) -> [f64; BANDS] {
        let mut acc = [0.0; BANDS];
        for (v, &b) in values.iter().zip(&self.band) {
            acc[b] += v;
        }
        for (a, c) in acc.iter_mut().zip(&self.band_count) {
            *a /= c.max(1.0);
        }
        acc
    }
}

/// Observed statistics of one channel.
struct ChannelStats {
    spectrum: Vec<Complex64>,
    noise: f64,
    band_power: [f64; BANDS],
    flat: bool,
}

fn channel_stats(image: &Plane, spectral: &Spectral, snr_param: f64) -> ChannelStats {
    let mean = image.mean();
    let padded = spectral.plan.pad(image).map(|v| v - mean);
    let spectrum = spectral.plan.fft().forward_real(&padded);
    let n = spectrum.len() as f64;
    let mut power: Vec<f64> = spectrum.iter().map(|c| c.norm_sqr() / n).collect();
    power[0] = 0.0;
    let mut outer: Vec<f64> = power
        .iter()
        .zip(&spectral.outer)
        .filter(|(_, &o)| o)
        .map(|(&p, _)| p)
        .collect();
    let median = median(&mut outer);
    let mean_power = power.iter().sum::<f64>() / n;
    let noise = median.max(mean_power / snr_param);
    ChannelStats {
        band_power: spectral.band_mean(&power),
        flat: !(noise > 0.0),
        spectrum,
        noise,
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn bin_cost(
    stats: &ChannelStats,
    kernel: &Plane,
    spectral: &Spectral,
    window: usize,
    dims: (usize, usize),
) -> Plane {
    if stats.flat {
        return Plane::new(dims.0, dims.1);
    }
    let h2: Vec<f64> = spectral
        .plan
        .kernel_spectrum(kernel)
        .iter()
        .map(|c| c.norm_sqr())
        .collect();
    let kernel_band = spectral.band_mean(&h2);
    let mut texture = [0.0; BANDS];
    for b in 0..BANDS {
        texture[b] = (stats.band_power[b] - stats.noise).max(0.0) / kernel_band[b].max(1e-30);
    }
    let mut log_sum = 0.0;
    let mut whitened = stats.spectrum.clone();
    for (i, (v, &g)) in whitened.iter_mut().zip(&h2).enumerate() {
        let p = texture[spectral.band[i]] * g + stats.noise;
        if i > 0 {
            log_sum += p.ln();
        }
        *v /= p.sqrt();
    }
    let geo = (log_sum / (h2.len() - 1).max(1) as f64).exp();
    let q = spectral.plan.inverse_crop(whitened);
    box_filter(&q.map(|v| v * v), window).map(|v| geo * v)
}

fn check_args(image: &RgbImage, bank: &PsfBank, window: usize, snr_param: f64) -> Result<()> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "cost window must be odd and >= 1, got {window}"
        )));
    }
    if !(snr_param > 0.0) {
        return Err(Error::InvalidArgument("snr_param must be > 0".into()));
    }
    if image.width() == 0 || image.height() == 0 || bank.is_empty() {
        return Err(Error::EmptyInput("image or PSF bank is empty".into()));
    }
    Ok(())
}

/// Cost volume of a single channel.
pub fn channel_cost_volume(
    image: &Plane,
    channel: usize,
    bank: &PsfBank,
    window: usize,
    snr_param: f64,
) -> Result<CostVolume> {
    if channel > 2 {
        return Err(Error::InvalidArgument(format!("channel must be 0..2, got {channel}")));
    }
    check_args(&RgbImage::gray(image.clone()), bank, window, snr_param)?;
    let spectral = Spectral::new(image.width(), image.height(), bank.kernel_size());
    let stats = channel_stats(image, &spectral, snr_param);
    let planes = crate::par::map_range(bank.len(), |d| {
        bin_cost(&stats, bank.kernel(d, channel), &spectral, window, image.dims())
    });
    CostVolume::new(planes)
}

/// Sum over channels of the per-channel costs.
pub fn depth_cost_volume(
    coded: &RgbImage,
    bank: &PsfBank,
    window: usize,
    snr_param: f64,
) -> Result<CostVolume> {
    check_args(coded, bank, window, snr_param)?;
    let spectral = Spectral::new(coded.width(), coded.height(), bank.kernel_size());
    let stats: Vec<ChannelStats> = crate::par::map_range(3, |c| {
        channel_stats(&coded.channels[c], &spectral, snr_param)
    });
    let planes = crate::par::map_range(bank.len(), |d| {
        let mut total = Plane::new(coded.width(), coded.height());
        for (c, s) in stats.iter().enumerate() {
            let cost = bin_cost(s, bank.kernel(d, c), &spectral, window, coded.dims());
            total = total.zip_map(&cost, |a, b| a + b);
        }
        total
    });
    CostVolume::new(planes)
}

/// Wiener deconvolution `conj(H)·Y / (|H|² + 1/snr)` with replicate padding.
pub fn wiener_deconvolve(image: &Plane, kernel: &Plane, snr_param: f64) -> Result<Plane> {
    if !(snr_param > 0.0) {
        return Err(Error::InvalidArgument("snr_param must be > 0".into()));
    }
    if kernel.width() % 2 == 0 || kernel.height() % 2 == 0 {
        return Err(Error::InvalidArgument("kernel sides must be odd".into()));
    }
    let margin = kernel.width().max(kernel.height()) / 2 + EXTRA_MARGIN;
    let plan = PaddedFft::new(image.width(), image.height(), margin);
    let h = plan.kernel_spectrum(kernel);
    let mut y = plan.forward(image);
    let reg = 1.0 / snr_param;
    for (v, hk) in y.iter_mut().zip(&h) {
        *v = hk.conj() * *v / (hk.norm_sqr() + reg);
    }
    Ok(plan.inverse_crop(y))
}

/// Per-pixel depth label with a normalized cost margin.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthEstimate {
    pub depth: Plane,
    pub confidence: Plane,
    pub bin_index: Vec<usize>,
    pub bins: DepthBins,
}

pub const CONFIDENCE_EPS: f64 = 1e-12;

/// Argmin over bins; ties go to the smaller depth.
pub fn classify_depth(costs: &CostVolume, bins: &DepthBins) -> Result<DepthEstimate> {
    if costs.bins() != bins.count() {
        return Err(Error::InvalidArgument(format!(
            "cost volume has {} bins, depth bins have {}",
            costs.bins(),
            bins.count()
        )));
    }
    let (w, h) = costs.dims();
    let n = w * h;
    let mut bin_index = vec![0usize; n];
    let mut depth = Plane::new(w, h);
    let mut confidence = Plane::new(w, h);
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        let mut arg = 0;
        for (d, plane) in costs.planes().iter().enumerate() {
            let c = plane.data()[i];
            if !c.is_finite() {
                return Err(Error::InvalidArgument("cost volume is not finite".into()));
            }
            if c < best {
                second = best;
                best = c;
                arg = d;
            } else if c < second {
                second = c;
            }
        }
        bin_index[i] = arg;
        depth.data_mut()[i] = bins.centers()[arg];
        confidence.data_mut()[i] = if second.is_finite() {
            ((second - best) / (second + CONFIDENCE_EPS)).clamp(0.0, 1.0)
        } else {
            1.0
        };
    }
    Ok(DepthEstimate {
        depth,
        confidence,
        bin_index,
        bins: bins.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::convolve;
    use crate::optics::Psf;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_plane(w: usize, h: usize, seed: u64) -> Plane {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h).map(|_| rng.random::<f64>()).collect();
        Plane::from_vec(w, h, data).unwrap()
    }

    fn psnr(a: &Plane, b: &Plane, margin: usize) -> f64 {
        let (w, h) = a.dims();
        let mut se = 0.0;
        let mut n = 0.0;
        for y in margin..h - margin {
            for x in margin..w - margin {
                se += (a.get(x, y) - b.get(x, y)).powi(2);
                n += 1.0;
            }
        }
        10.0 * (1.0 / (se / n)).log10()
    }

    fn disk(size: usize, r: f64) -> Plane {
        let c = (size / 2) as f64;
        let k = Plane::from_fn(size, size, |x, y| {
            let d = (x as f64 - c).hypot(y as f64 - c);
            (r + 0.5 - d).clamp(0.0, 1.0)
        });
        let s = k.sum();
        k.map(|v| v / s)
    }

    #[test]
    fn wiener_identity() {
        let img = noise_plane(32, 24, 1);
        let mut delta = Plane::new(3, 3);
        delta.set(1, 1, 1.0);
        let out = wiener_deconvolve(&img, &delta, 1e8).unwrap();
        assert!(img.max_abs_diff_interior(&out, 0) < 1e-6);
    }

    #[test]
    fn wiener_round_trip_psnr() {
        let img = crate::fft::gaussian_blur(&noise_plane(96, 96, 2), 2.0);
        let taps = crate::fft::gaussian_taps(1.0);
        let k = Plane::from_fn(7, 7, |x, y| taps[x] * taps[y] * (1.0 + 0.05 * x as f64));
        let k = k.map(|v| v / k.sum());
        let y = convolve(&img, &k);
        let x = wiener_deconvolve(&y, &k, 1e4).unwrap();
        let p = psnr(&x, &img, 16);
        assert!(p >= 35.0, "psnr {p}");
    }

    #[test]
    fn classify_ties_and_membership() {
        let bins = crate::render::make_depth_bins(3, 1.0, 3.0, crate::render::BinSpacing::Linear).unwrap();
        let costs = CostVolume::new(vec![
            Plane::filled(2, 2, 1.0),
            Plane::filled(2, 2, 1.0),
            Plane::filled(2, 2, 2.0),
        ])
        .unwrap();
        let est = classify_depth(&costs, &bins).unwrap();
        assert!(est.depth.data().iter().all(|&d| d == bins.centers()[0]));
        assert!(est.confidence.data().iter().all(|&c| c == 0.0));
        let costs = CostVolume::new(vec![
            Plane::filled(2, 2, 3.0),
            Plane::filled(2, 2, 2.0),
            Plane::filled(2, 2, 1.0),
        ])
        .unwrap();
        let est = classify_depth(&costs, &bins).unwrap();
        assert!(est.depth.data().iter().all(|&d| d == bins.centers()[2]));
        assert!(est.confidence.data().iter().all(|&c| (c - 0.5).abs() < 1e-9));
    }

    fn toy_bank() -> (PsfBank, DepthBins) {
        let bins = crate::render::make_depth_bins(4, 0.5, 6.0, crate::render::BinSpacing::Inverse).unwrap();
        let psfs = bins
            .centers()
            .iter()
            .enumerate()
            .flat_map(|(i, &d)| {
                let k = disk(21, [0.5, 1.5, 3.0, 4.5][i]);
                (0..3).map(move |_| Psf {
                    depth: d,
                    wavelength: 5e-7,
                    kernel: k.clone(),
                })
            })
            .collect();
        (PsfBank::from_parts(bins.centers().to_vec(), psfs).unwrap(), bins)
    }

    #[test]
    fn flat_input_has_equal_costs() {
        let (bank, _) = toy_bank();
        let img = RgbImage::gray(Plane::filled(40, 30, 0.37));
        let cv = depth_cost_volume(&img, &bank, 21, 1e4).unwrap();
        for i in 0..40 * 30 {
            let v: Vec<f64> = cv.planes().iter().map(|p| p.data()[i]).collect();
            let spread = v.iter().cloned().fold(f64::MIN, f64::max)
                - v.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 1e-6);
            assert!(v.iter().all(|&c| c >= 0.0));
        }
    }

    #[test]
    fn recovers_disk_blur() {
        let (bank, bins) = toy_bank();
        for t in 0..4 {
            let mut rgb = RgbImage::new(120, 120);
            for c in 0..3 {
                rgb.channels[c] = convolve(&noise_plane(120, 120, 10 + c as u64), bank.kernel(t, c));
            }
            let cv = depth_cost_volume(&rgb, &bank, 21, 1e4).unwrap();
            let est = classify_depth(&cv, &bins).unwrap();
            let mut ok = 0;
            let mut n = 0;
            for y in 20..100 {
                for x in 20..100 {
                    n += 1;
                    ok += (est.bin_index[y * 120 + x] == t) as usize;
                }
            }
            assert!(ok as f64 / n as f64 > 0.95, "bin {t}: {ok}/{n} {:?}", &est.bin_index[60 * 120 + 20..60 * 120 + 100]);
        }
    }

    #[test]
    fn channel_costs_add_up() {
        let (bank, _) = toy_bank();
        let mut rgb = RgbImage::new(40, 36);
        for c in 0..3 {
            rgb.channels[c] = noise_plane(40, 36, 20 + c as u64);
        }
        let joint = depth_cost_volume(&rgb, &bank, 9, 1e4).unwrap();
        let mut sum = channel_cost_volume(&rgb.channels[0], 0, &bank, 9, 1e4).unwrap();
        for c in 1..3 {
            sum = sum.add(&channel_cost_volume(&rgb.channels[c], c, &bank, 9, 1e4).unwrap()).unwrap();
        }
        for (a, b) in joint.planes().iter().zip(sum.planes()) {
            assert!(a.max_abs_diff_interior(b, 0) < 1e-10);
        }
    }

    #[test]
    fn rejects_even_window() {
        let (bank, _) = toy_bank();
        let img = RgbImage::gray(Plane::filled(10, 10, 0.5));
        assert!(depth_cost_volume(&img, &bank, 4, 1e4).is_err());
        assert!(depth_cost_volume(&img, &bank, 5, 0.0).is_err());
    }
}
