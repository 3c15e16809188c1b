use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::align_points;
use crate::vo::Trajectory;

pub const DEFAULT_MAX_DT: f64 = 0.02;

/// Greedy nearest-timestamp matching of two sorted timestamp lists:
/// candidate pairs within `max_dt` are taken in order of increasing `|Δt|`
/// (index order on ties), each index at most once. Sorted by `a` index.
pub fn associate_timestamps(a: &[f64], b: &[f64], max_dt: f64) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (i, &ta) in a.iter().enumerate() {
        // timestamps are sorted; scan only the window around `ta`
        let start = b.partition_point(|&tb| tb < ta - max_dt);
        for (j, &tb) in b.iter().enumerate().skip(start) {
            if tb > ta + max_dt {
                break;
            }
            candidates.push(((ta - tb).abs(), i, j));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Pairs estimated and reference poses by timestamp; see
/// [`associate_timestamps`].
pub fn associate(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<Vec<(usize, usize)>> {
    if !(max_dt >= 0.0) {
        return Err(Error::InvalidArgument("max_dt must be >= 0".into()));
    }
    let te = est.timestamps();
    let tg = gt.timestamps();
    let pairs = associate_timestamps(&te, &tg, max_dt);
    if pairs.is_empty() {
        return Err(Error::Association(format!(
            "no timestamps within {max_dt} s (estimate spans {:.3}..{:.3}, reference {:.3}..{:.3})",
            te[0],
            te[te.len() - 1],
            tg[0],
            tg[tg.len() - 1]
        )));
    }
    Ok(pairs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// 1 unless the similarity mode was requested.
    pub scale: f64,
    pub rmse: f64,
    pub pairs_used: usize,
    /// Residual norm per pair.
    pub residuals: Vec<f64>,
    /// Estimated positions mapped into the reference frame.
    pub aligned: Vec<Vector3<f64>>,
}

/// Least-squares rigid (or similarity) map of `est` onto `gt`.
pub fn rigid_align(est: &[Vector3<f64>], gt: &[Vector3<f64>], with_scale: bool) -> Result<AlignmentResult> {
    let fit = align_points(est, gt, with_scale)?;
    let aligned: Vec<_> = est.iter().map(|p| fit.apply(p)).collect();
    let residuals: Vec<f64> = aligned.iter().zip(gt).map(|(a, g)| (a - g).norm()).collect();
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(AlignmentResult {
        rotation: fit.transform.rotation,
        translation: fit.transform.translation,
        scale: fit.scale,
        rmse,
        pairs_used: est.len(),
        residuals,
        aligned,
    })
}

pub fn rigid_align_no_scale(est: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<AlignmentResult> {
    rigid_align(est, gt, false)
}

/// Associated positions and their alignment.
pub fn align_trajectories(
    est: &Trajectory,
    gt: &Trajectory,
    max_dt: f64,
    with_scale: bool,
) -> Result<(Vec<(usize, usize)>, AlignmentResult)> {
    let pairs = associate(est, gt, max_dt)?;
    let e: Vec<_> = pairs.iter().map(|&(i, _)| est.poses()[i].translation).collect();
    let g: Vec<_> = pairs.iter().map(|&(_, j)| gt.poses()[j].translation).collect();
    let result = rigid_align(&e, &g, with_scale)?;
    Ok((pairs, result))
}

/// Absolute trajectory error: RMSE of translations after rigid alignment.
pub fn compute_ate(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<f64> {
    Ok(align_trajectories(est, gt, max_dt, false)?.1.rmse)
}
