use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use codedcam::depth::depth_cost_volume;
use codedcam::optics::build_psf_bank;
use codedcam::par::is_parallel;
use codedcam::pipeline::{build_optics, render_frame, run_sequence, PipelineConfig};
use codedcam::render::{quantize_depth, render_coded};
use codedcam::synth::SynthSequence;

/// Runs `f` on the default build and, when rayon is enabled, again inside a
/// one-thread pool. Build with `--no-default-features` for the plain
/// sequential fallback.
fn variants(c: &mut Criterion, group: &str, mut f: impl FnMut() + Send) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    let label = if is_parallel() { "rayon" } else { "sequential" };
    g.bench_function(BenchmarkId::from_parameter(label), |b| b.iter(&mut f));
    if is_parallel() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::from_parameter("rayon-1-thread"), |b| b.iter(|| pool.install(&mut f)));
    }
    g.finish();
}

fn benches(c: &mut Criterion) {
    let config = PipelineConfig::default();
    let optics = build_optics(&config).unwrap();
    let seq = SynthSequence::two_plane(160, 120, 4, 1.3444, 2.4733, 5);
    let frame = seq.frame(0).unwrap();
    let dec = quantize_depth(&frame, &optics.bins);
    let coded = render_frame(&frame, &optics, 0.0, 0).unwrap();

    variants(c, "psf_bank_27_bins", || {
        build_psf_bank(&optics.mask, &optics.amplitude, &config.camera, optics.bins.centers()).unwrap();
    });
    variants(c, "render_160x120", || {
        render_coded(&frame, &dec, &optics.bank).unwrap();
    });
    variants(c, "cost_volume_160x120", || {
        depth_cost_volume(&coded.rgb, &optics.bank, config.estimator.window, config.estimator.snr).unwrap();
    });
    let ts: Vec<f64> = (0..4).map(|i| seq.timestamp(i)).collect();
    let gt = seq.ground_truth().unwrap();
    variants(c, "sequence_4x160x120", || {
        run_sequence(4, &ts, |i| seq.frame(i), Some(&gt), &config, &optics).unwrap();
    });
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
