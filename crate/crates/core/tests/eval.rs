use codedcam::eval::{associate_timestamps, compute_ate, rigid_align};
use codedcam::geometry::Rigid;
use codedcam::vo::{Pose, Trajectory};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn rigid() -> impl Strategy<Value = Rigid> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        0.0f64..3.1,
        prop::array::uniform3(-5.0f64..5.0),
    )
        .prop_filter("axis", |(a, _, _)| Vector3::from(*a).norm() > 0.1)
        .prop_map(|(a, ang, t)| Rigid::from_axis_angle(Vector3::from(a), ang, Vector3::from(t)))
}

/// Non-collinear random paths.
fn path(n: usize) -> impl Strategy<Value = Vec<Vector3<f64>>> {
    prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), n)
        .prop_map(|v| v.into_iter().map(Vector3::from).collect::<Vec<_>>())
        .prop_filter("spread", |p| !codedcam::geometry::is_degenerate(p))
}

fn trajectory(points: &[Vector3<f64>], dt: f64) -> Trajectory {
    Trajectory::new(
        points
            .iter()
            .enumerate()
            .map(|(i, p)| Pose::from_rigid(Rigid::new(Matrix3::identity(), *p), i as f64 * dt))
            .collect(),
    )
    .unwrap()
}

fn rmse(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>() / a.len() as f64).sqrt()
}

proptest! {
    #[test]
    fn ate_ignores_rigid_motion_of_estimate(gt in path(12), noise in path(12), t in rigid()) {
        let est: Vec<_> = gt.iter().zip(&noise).map(|(g, n)| g + 0.05 * n).collect();
        let a = compute_ate(&trajectory(&est, 0.1), &trajectory(&gt, 0.1), 0.02).unwrap();
        let moved: Vec<_> = est.iter().map(|p| t.apply(p)).collect();
        let b = compute_ate(&trajectory(&moved, 0.1), &trajectory(&gt, 0.1), 0.02).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        let exact: Vec<_> = gt.iter().map(|p| t.apply(p)).collect();
        prop_assert!(compute_ate(&trajectory(&exact, 0.1), &trajectory(&gt, 0.1), 0.02).unwrap() < 1e-9);
    }

    #[test]
    fn scale_error_shows_without_scale_fit(gt in path(10), s in 1.2f64..3.0) {
        let est: Vec<_> = gt.iter().map(|p| s * p).collect();
        let rigid_fit = rigid_align(&est, &gt, false).unwrap();
        let sim_fit = rigid_align(&est, &gt, true).unwrap();
        prop_assert!(rigid_fit.rmse > 1e-3);
        prop_assert!(sim_fit.rmse < 1e-9);
        prop_assert!((sim_fit.scale - 1.0 / s).abs() < 1e-9);
    }

    #[test]
    fn alignment_is_least_squares_optimal(gt in path(10), noise in path(10), d in rigid()) {
        let est: Vec<_> = gt.iter().zip(&noise).map(|(g, n)| g + 0.1 * n).collect();
        let fit = rigid_align(&est, &gt, false).unwrap();
        let best = Rigid::new(fit.rotation, fit.translation);
        // any small perturbation of the fitted transform cannot do better
        let small = Rigid::from_axis_angle(d.rotation.column(0).into_owned(), 0.01, d.translation * 0.002);
        let perturbed = small.compose(&best);
        let moved: Vec<_> = est.iter().map(|p| perturbed.apply(p)).collect();
        prop_assert!(fit.rmse <= rmse(&moved, &gt) + 1e-12);
        let aligned: Vec<_> = est.iter().map(|p| best.apply(p)).collect();
        prop_assert!((rmse(&aligned, &gt) - fit.rmse).abs() < 1e-9);
    }

    #[test]
    fn single_displacement_bounds_ate(gt in path(10), k in 0usize..10, d in prop::array::uniform3(-1.0f64..1.0)) {
        let d = Vector3::from(d);
        let mut est = gt.clone();
        est[k] += d;
        let ate = compute_ate(&trajectory(&est, 1.0), &trajectory(&gt, 1.0), 0.02).unwrap();
        // the identity alignment already achieves |d|/sqrt(n)
        prop_assert!(ate <= d.norm() / 10f64.sqrt() + 1e-9);
        // translation-only oracle: the best shift spreads d over all poses
        let shift_only = (d.norm_squared() * (1.0 - 1.0 / 10.0) / 10.0).sqrt();
        prop_assert!(ate <= shift_only + 1e-9);
    }

    #[test]
    fn association_is_one_to_one_and_within_tolerance(
        mut a in prop::collection::vec(0.0f64..10.0, 0..40),
        mut b in prop::collection::vec(0.0f64..10.0, 0..40),
        max_dt in 0.0f64..0.5,
    ) {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let pairs = associate_timestamps(&a, &b, max_dt);
        let mut used_a = std::collections::HashSet::new();
        let mut used_b = std::collections::HashSet::new();
        for &(i, j) in &pairs {
            prop_assert!(used_a.insert(i) && used_b.insert(j));
            prop_assert!((a[i] - b[j]).abs() <= max_dt);
        }
        prop_assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(pairs.len() <= a.len().min(b.len()));
    }

    #[test]
    fn identical_timestamps_pair_up(n in 1usize..30) {
        let t: Vec<f64> = (0..n).map(|i| i as f64 / 30.0).collect();
        let pairs = associate_timestamps(&t, &t, 0.01);
        prop_assert_eq!(pairs, (0..n).map(|i| (i, i)).collect::<Vec<_>>());
    }
}

#[test]
fn collinear_or_unmatched_inputs_fail() {
    let line: Vec<_> = (0..6).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
    assert!(compute_ate(&trajectory(&line, 1.0), &trajectory(&line, 1.0), 0.02).is_err());
    let pts: Vec<_> = (0..6).map(|i| Vector3::new(i as f64, (i * i) as f64, 0.0)).collect();
    let shifted = Trajectory::new(
        pts.iter()
            .enumerate()
            .map(|(i, p)| Pose::from_rigid(Rigid::new(Matrix3::identity(), *p), 100.0 + i as f64))
            .collect(),
    )
    .unwrap();
    assert!(compute_ate(&shifted, &trajectory(&pts, 1.0), 0.02).is_err());
}
