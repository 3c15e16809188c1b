use codedcam::io::{load_dataset, AssociationMode};
use codedcam::pipeline::{build_optics, run_pipeline, PipelineConfig};
use codedcam::synth::SynthSequence;

fn small_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.bins.count = 9;
    c.mask.grid = 15;
    c.render.noise_sigma = 0.002;
    c
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let seq = SynthSequence::two_plane(96, 72, 4, 1.3, 2.5, 7);
    seq.write_dataset(dir.path()).unwrap();
    let ds = load_dataset(dir.path(), AssociationMode::Auto).unwrap();
    let config = small_config();
    let a = run_pipeline(&ds, &config).unwrap();
    let b = run_pipeline(&ds, &config).unwrap();
    assert_eq!(a.odometry.trajectory, b.odometry.trajectory);
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.bank_fingerprint, b.bank_fingerprint);
    for (x, y) in a.frames.iter().zip(&b.frames) {
        assert_eq!(x.coded, y.coded);
        assert_eq!(x.depth, y.depth);
    }
    assert_eq!(a.frames.len(), 4);
    assert!(a.ate().is_some());
    let m = a.metrics.as_ref().unwrap();
    assert!((0.0..=1.0).contains(&m.delta1));

    let mut other = config.clone();
    other.seed += 1;
    let c = run_pipeline(&ds, &other).unwrap();
    assert_ne!(c.frames[0].coded, a.frames[0].coded);
}

#[test]
fn fingerprint_tracks_optics() {
    let a = build_optics(&small_config()).unwrap();
    let mut changed = small_config();
    changed.camera.focus_distance = 1.2;
    let b = build_optics(&changed).unwrap();
    assert_ne!(a.bank.fingerprint(), b.bank.fingerprint());
    assert_eq!(a.bank.fingerprint(), build_optics(&small_config()).unwrap().bank.fingerprint());
}

#[test]
fn invalid_config_is_rejected() {
    let mut c = small_config();
    c.bins.near = 7.0;
    assert!(c.validate().is_err());
    assert!(build_optics(&c).is_err());
}
