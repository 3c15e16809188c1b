use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::VoConfig;
use crate::error::{Error, Result};
use crate::geometry::{align_points, Rigid};
use crate::grid::Plane;
use crate::intrinsics::Intrinsics;

const MIN_SAMPLE_SIZE: usize = 3;
const SAMPLE_RETRIES: usize = 64;
const REFIT_ROUNDS: usize = 4;

/// Camera-frame point for a level-0 keypoint position, or `None` when the
/// depth there is invalid or beyond the gate. Depth is read at the nearest
/// pixel.
pub fn backproject(
    x: f64,
    y: f64,
    depth: &Plane,
    intrinsics: &Intrinsics,
    depth_gate: f64,
) -> Option<Vector3<f64>> {
    let (w, h) = depth.dims();
    let (u, v) = (x.round(), y.round());
    if u < 0.0 || v < 0.0 || u >= w as f64 || v >= h as f64 {
        return None;
    }
    let z = depth.get(u as usize, v as usize);
    if !(z > 0.0 && z.is_finite() && z <= depth_gate) {
        return None;
    }
    let p = intrinsics.backproject(x, y, z);
    Some(Vector3::new(p[0], p[1], p[2]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelativePose {
    /// Maps previous-frame camera coordinates to current-frame ones.
    pub transform: Rigid,
    pub inliers: usize,
    pub inlier_mask: Vec<bool>,
}

fn well_spread(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> bool {
    let (u, v) = (b - a, c - a);
    let (nu, nv) = (u.norm(), v.norm());
    nu > 1e-9 && nv > 1e-9 && (c - b).norm() > 1e-9 && u.cross(&v).norm() > 1e-3 * nu * nv
}

fn classify(t: &Rigid, prev: &[Vector3<f64>], curr: &[Vector3<f64>], threshold: f64) -> Vec<bool> {
    prev.iter()
        .zip(curr)
        .map(|(p, q)| (t.apply(p) - q).norm() < threshold)
        .collect()
}

fn subset(points: &[Vector3<f64>], mask: &[bool]) -> Vec<Vector3<f64>> {
    points
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(p, _)| *p)
        .collect()
}

/// RANSAC over minimal 3-point rigid fits, then least-squares refit on the
/// inlier set. Deterministic for a fixed `config.seed`.
pub fn estimate_relative_pose(
    points_prev: &[Vector3<f64>],
    points_curr: &[Vector3<f64>],
    config: &VoConfig,
) -> Result<RelativePose> {
    if points_prev.len() != points_curr.len() {
        return Err(Error::InvalidArgument("point lists must be paired".into()));
    }
    let n = points_prev.len();
    let required = config.min_inliers.max(MIN_SAMPLE_SIZE);
    if n < required {
        return Err(Error::TooFewCorrespondences { found: n, required });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(usize, Rigid)> = None;
    for _ in 0..config.ransac_iterations {
        let mut sample = None;
        for _ in 0..SAMPLE_RETRIES {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            if i == j || j == k || i == k {
                continue;
            }
            let (a, b, c) = (&points_prev[i], &points_prev[j], &points_prev[k]);
            let (d, e, f) = (&points_curr[i], &points_curr[j], &points_curr[k]);
            if well_spread(a, b, c) && well_spread(d, e, f) {
                sample = Some([i, j, k]);
                break;
            }
        }
        let Some(idx) = sample else { continue };
        let src: Vec<_> = idx.iter().map(|&i| points_prev[i]).collect();
        let dst: Vec<_> = idx.iter().map(|&i| points_curr[i]).collect();
        let Ok(fit) = align_points(&src, &dst, false) else { continue };
        let count = classify(&fit.transform, points_prev, points_curr, config.inlier_threshold)
            .iter()
            .filter(|&&m| m)
            .count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, fit.transform));
            if count == n {
                break;
            }
        }
    }
    let Some((_, mut transform)) = best else {
        return Err(Error::TooFewCorrespondences { found: 0, required });
    };
    let mut mask = classify(&transform, points_prev, points_curr, config.inlier_threshold);
    for _ in 0..REFIT_ROUNDS {
        let src = subset(points_prev, &mask);
        let dst = subset(points_curr, &mask);
        if src.len() < MIN_SAMPLE_SIZE {
            break;
        }
        let Ok(fit) = align_points(&src, &dst, false) else { break };
        let next = classify(&fit.transform, points_prev, points_curr, config.inlier_threshold);
        let stable = next == mask;
        if next.iter().filter(|&&m| m).count() < mask.iter().filter(|&&m| m).count() {
            transform = fit.transform;
            break;
        }
        transform = fit.transform;
        mask = next;
        if stable {
            break;
        }
    }
    let inliers = mask.iter().filter(|&&m| m).count();
    if inliers < required {
        return Err(Error::TooFewCorrespondences {
            found: inliers,
            required,
        });
    }
    Ok(RelativePose {
        transform,
        inliers,
        inlier_mask: mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Uniform};

    fn cloud(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Uniform::new(-1.0, 1.0).unwrap();
        (0..n)
            .map(|_| Vector3::new(u.sample(&mut rng), u.sample(&mut rng), 2.0 + u.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn backprojection() {
        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let d = Plane::filled(640, 480, 2.0);
        assert_eq!(backproject(320.0, 240.0, &d, &k, 3.0), Some(Vector3::new(0.0, 0.0, 2.0)));
        let d1 = Plane::filled(1000, 480, 1.0);
        assert_eq!(backproject(820.0, 240.0, &d1, &k, 3.0), Some(Vector3::new(1.0, 0.0, 1.0)));
        let far = Plane::filled(640, 480, 3.5);
        assert_eq!(backproject(10.0, 10.0, &far, &k, 3.0), None);
        let zero = Plane::new(640, 480);
        assert_eq!(backproject(10.0, 10.0, &zero, &k, 3.0), None);
    }

    #[test]
    fn identity_motion() {
        let p = cloud(40, 1);
        let r = estimate_relative_pose(&p, &p, &VoConfig::default()).unwrap();
        assert_eq!(r.inliers, 40);
        assert!(r.transform.rotation_error(&Rigid::identity()) < 1e-9);
        assert!(r.transform.translation.norm() < 1e-9);
    }

    #[test]
    fn known_motion_with_outliers() {
        let p = cloud(100, 2);
        let t = Rigid::from_axis_angle(Vector3::new(0.1, 1.0, 0.2), 0.2, Vector3::new(0.3, -0.1, 0.05));
        let mut q: Vec<_> = p.iter().map(|x| t.apply(x)).collect();
        let exact = estimate_relative_pose(&p, &q, &VoConfig::default()).unwrap();
        assert!(exact.transform.rotation_error(&t) < 1e-9);
        let junk = cloud(30, 3);
        for (i, j) in junk.iter().enumerate() {
            q[i * 3] = j + Vector3::new(0.5, 0.5, 0.5);
        }
        let robust = estimate_relative_pose(&p, &q, &VoConfig::default()).unwrap();
        assert!(robust.transform.rotation_error(&t) < 1e-6);
        assert!((robust.transform.translation - t.translation).norm() < 1e-6);
        assert_eq!(robust.inliers, 70);
    }

    #[test]
    fn too_few_points() {
        let p = cloud(5, 4);
        assert!(matches!(
            estimate_relative_pose(&p, &p, &VoConfig::default()),
            Err(Error::TooFewCorrespondences { found: 5, required: 12 })
        ));
    }
}
