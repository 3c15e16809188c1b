//! Depth layering and coded-frame rendering.

mod bins;
mod layers;
mod noise;

pub use bins::{make_depth_bins, BinSpacing, DepthBins, DEFAULT_BIN_COUNT, DEFAULT_FAR, DEFAULT_NEAR};
pub use layers::{
    composite, is_valid_depth, quantize_depth, quantize_depth_map, render_coded, CodedFrame,
    LayerDecomposition, SceneFrame, COVERAGE_EPS, COVERAGE_THRESHOLD,
};
pub use noise::add_sensor_noise;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::convolve;
    use crate::grid::{Plane, RgbImage};
    use crate::intrinsics::Intrinsics;
    use crate::optics::{Psf, PsfBank};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_kernel(size: usize, sigma: f64, skew: f64) -> Plane {
        let r = (size / 2) as f64;
        let k = Plane::from_fn(size, size, |x, y| {
            let (u, v) = (x as f64 - r, y as f64 - r);
            (-(u * u / (2.0 * sigma * sigma) + v * v / (2.0 * sigma * sigma * skew))).exp()
                * (1.0 + 0.1 * (u / r))
        });
        let s = k.sum();
        k.map(|v| v / s)
    }

    fn bank(bins: &DepthBins, size: usize) -> PsfBank {
        let psfs = bins
            .centers()
            .iter()
            .enumerate()
            .flat_map(|(i, &d)| {
                (0..3).map(move |c| Psf {
                    depth: d,
                    wavelength: 500e-9,
                    kernel: gaussian_kernel(size, 0.6 + 0.4 * i as f64, 1.0 + 0.2 * c as f64),
                })
            })
            .collect();
        PsfBank::from_parts(bins.centers().to_vec(), psfs).unwrap()
    }

    fn random_rgb(w: usize, h: usize, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = RgbImage::new(w, h);
        for p in img.channels.iter_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = rng.random());
        }
        img
    }

    fn k() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 20.0, 20.0).unwrap()
    }

    #[test]
    fn constant_depth_reduces_to_convolution() {
        let bins = make_depth_bins(4, 0.5, 6.0, BinSpacing::Inverse).unwrap();
        for size in [7, 17] {
            let bank = bank(&bins, size);
            let rgb = random_rgb(48, 40, 1);
            let depth = Plane::filled(48, 40, bins.centers()[2]);
            let frame = SceneFrame::new(rgb.clone(), depth, k()).unwrap();
            let dec = quantize_depth(&frame, &bins);
            let out = render_coded(&frame, &dec, &bank).unwrap();
            for c in 0..3 {
                let want = convolve(&rgb.channels[c], bank.kernel(2, c));
                assert!(out.rgb.channels[c].max_abs_diff_interior(&want, size / 2) < 1e-6);
            }
            assert_eq!(out.provenance, bank.fingerprint());
        }
    }

    #[test]
    fn impulse_gives_kernel() {
        let bins = make_depth_bins(3, 0.5, 6.0, BinSpacing::Inverse).unwrap();
        let bank = bank(&bins, 9);
        let mut p = Plane::new(31, 31);
        p.set(15, 15, 1.0);
        let frame = SceneFrame::new(RgbImage::gray(p), Plane::filled(31, 31, bins.centers()[1]), k()).unwrap();
        let out = render_coded(&frame, &quantize_depth(&frame, &bins), &bank).unwrap();
        for c in 0..3 {
            let kern = bank.kernel(1, c);
            for y in 0..9 {
                for x in 0..9 {
                    assert!((out.rgb.channels[c].get(11 + x, 11 + y) - kern.get(x, y)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bin_mismatch_rejected() {
        let bins = make_depth_bins(3, 0.5, 6.0, BinSpacing::Inverse).unwrap();
        let other = make_depth_bins(4, 0.5, 6.0, BinSpacing::Inverse).unwrap();
        let frame = SceneFrame::new(random_rgb(8, 8, 2), Plane::filled(8, 8, 1.0), k()).unwrap();
        let dec = quantize_depth(&frame, &bins);
        assert!(render_coded(&frame, &dec, &bank(&other, 5)).is_err());
    }

    #[test]
    fn invalid_depth_goes_far_and_is_flagged() {
        let bins = DepthBins::default();
        let mut depth = Plane::filled(4, 1, 1.0);
        depth.set(1, 0, 0.0);
        depth.set(2, 0, f64::NAN);
        let dec = quantize_depth_map(&depth, &bins);
        assert_eq!(dec.layer_index()[1], 26);
        assert_eq!(dec.layer_index()[2], 26);
        assert_eq!(dec.invalid(), &[false, true, true, false]);
    }

    #[test]
    fn noise_behaviour() {
        let frame = CodedFrame {
            rgb: RgbImage::gray(Plane::filled(200, 200, 0.5)),
            provenance: String::new(),
        };
        assert_eq!(add_sensor_noise(&frame, 0.0, 3).unwrap(), frame);
        let a = add_sensor_noise(&frame, 0.01, 3).unwrap();
        let b = add_sensor_noise(&frame, 0.01, 3).unwrap();
        assert_eq!(a, b);
        let n = 40000.0;
        let mean = a.rgb.channels[0].mean() - 0.5;
        assert!(mean.abs() < 3.0 * 0.01 / f64::sqrt(n));
        assert!(add_sensor_noise(&frame, -1.0, 0).is_err());
    }
}
