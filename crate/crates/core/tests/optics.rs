use codedcam::optics::{
    build_psf_bank, noll_to_nm, simulate_psf, ApertureAmplitude, CameraConfig, PhaseMask, DEFAULT_GRID_PITCH,
};
use proptest::prelude::*;

fn small_mask() -> PhaseMask {
    PhaseMask::default_coded(11).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn psf_is_nonnegative_and_normalized(depth in 0.5f64..6.0, channel in 0usize..3) {
        let cam = CameraConfig::default();
        let mask = small_mask();
        let amp = ApertureAmplitude::default_for(&mask, &cam);
        let psf = simulate_psf(depth, channel, &mask, &amp, &cam).unwrap();
        prop_assert!(psf.kernel.data().iter().all(|&v| v >= 0.0));
        prop_assert!((psf.kernel.sum() - 1.0).abs() < 1e-9);
        prop_assert_eq!(psf.kernel.dims(), (cam.psf_crop, cam.psf_crop));
    }

    #[test]
    fn amplitude_scale_does_not_change_normalized_psf(depth in 0.5f64..6.0, c in 0.05f64..1.0) {
        let cam = CameraConfig::default();
        let mask = small_mask();
        let amp = ApertureAmplitude::default_for(&mask, &cam);
        let a = simulate_psf(depth, 1, &mask, &amp, &cam).unwrap();
        let b = simulate_psf(depth, 1, &mask, &amp.scaled(c).unwrap(), &cam).unwrap();
        prop_assert!(a.kernel.max_abs_diff_interior(&b.kernel, 0) < 1e-12);
    }
}

#[test]
fn in_focus_flat_mask_is_compact() {
    let cam = CameraConfig::default();
    let mask = PhaseMask::zero(23, DEFAULT_GRID_PITCH);
    let amp = ApertureAmplitude::default_for(&mask, &cam);
    let psf = simulate_psf(cam.focus_distance, 1, &mask, &amp, &cam).unwrap();
    let c = cam.psf_crop / 2;
    let centre: f64 = (c - 2..=c + 2)
        .flat_map(|y| (c - 2..=c + 2).map(move |x| (x, y)))
        .map(|(x, y)| psf.kernel.get(x, y))
        .sum();
    assert!(centre >= 0.8, "{centre}");
}

#[test]
fn defocus_spreads_energy() {
    let cam = CameraConfig::default();
    let mask = PhaseMask::zero(23, DEFAULT_GRID_PITCH);
    let amp = ApertureAmplitude::default_for(&mask, &cam);
    let peak = |d: f64| {
        simulate_psf(d, 1, &mask, &amp, &cam)
            .unwrap()
            .kernel
            .data()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b))
    };
    assert!(peak(0.85) > peak(1.5));
    assert!(peak(1.5) > peak(5.0));
}

#[test]
fn bank_layout_and_fingerprint() {
    let cam = CameraConfig::default();
    let mask = small_mask();
    let amp = ApertureAmplitude::default_for(&mask, &cam);
    let bins = [0.6, 1.0, 3.0];
    let bank = build_psf_bank(&mask, &amp, &cam, &bins).unwrap();
    assert_eq!(bank.len(), 3);
    assert_eq!(bank.psfs().len(), 9);
    for b in 0..3 {
        for c in 0..3 {
            assert_eq!(bank.get(b, c).depth, bins[b]);
            assert_eq!(bank.get(b, c).wavelength, cam.wavelengths[c]);
        }
    }
    let again = build_psf_bank(&mask, &amp, &cam, &bins).unwrap();
    assert_eq!(bank.fingerprint(), again.fingerprint());
    assert!(build_psf_bank(&mask, &amp, &cam, &[1.0, 0.5]).is_err());
}

#[test]
fn noll_indices() {
    assert_eq!(noll_to_nm(1).unwrap(), (0, 0));
    assert_eq!(noll_to_nm(4).unwrap(), (2, 0));
    assert_eq!(noll_to_nm(5).unwrap(), (2, -2));
    assert_eq!(noll_to_nm(6).unwrap(), (2, 2));
    assert_eq!(noll_to_nm(11).unwrap(), (4, 0));
    assert!(noll_to_nm(0).is_err());
}
