//! Rigid transforms and closed-form point-set alignment.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// `p ↦ R·p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rigid {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Rigid {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rigid {
    pub fn identity() -> Self {
        Rigid {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Rigid {
            rotation,
            translation,
        }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Rigid::new(*r.matrix(), translation)
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Rigid) -> Rigid {
        Rigid {
            rotation: orthonormalize(&(self.rotation * other.rotation)),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Rigid {
        let rt = self.rotation.transpose();
        Rigid {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Rigid::new(*q.to_rotation_matrix().matrix(), translation)
    }

    /// Rotation angle of `self⁻¹ ∘ other`, radians.
    pub fn rotation_error(&self, other: &Rigid) -> f64 {
        let d = self.rotation.transpose() * other.rotation;
        let s = Vector3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)]);
        (s.norm() / 2.0).atan2((d.trace() - 1.0) / 2.0)
    }
}

/// Nearest rotation matrix (polar decomposition through the SVD).
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    (m.transpose() * m - Matrix3::identity()).abs().max() <= tol && (m.determinant() - 1.0).abs() <= tol
}

/// Least-squares `dst ≈ s·R·src + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub transform: Rigid,
    pub scale: f64,
}

impl Similarity {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.transform.rotation * p) + self.transform.translation
    }
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().fold(Vector3::zeros(), |a, p| a + p) / points.len() as f64
}

/// True when the points span less than a plane (all coincident or collinear),
/// judged relative to their spread.
pub fn is_degenerate(points: &[Vector3<f64>]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let c = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    !(ev[0] > 0.0) || ev[1] <= 1e-10 * ev[0]
}

/// Closed-form alignment by SVD of the cross-covariance with reflection
/// correction. Scale is fixed at 1 unless `with_scale`.
pub fn align_points(src: &[Vector3<f64>], dst: &[Vector3<f64>], with_scale: bool) -> Result<Similarity> {
    if src.len() != dst.len() {
        return Err(Error::Alignment(format!(
            "point lists differ in length ({} vs {})",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::Alignment(format!(
            "need at least 3 point pairs, got {}",
            src.len()
        )));
    }
    if is_degenerate(src) || is_degenerate(dst) {
        return Err(Error::Alignment(
            "points are collinear or coincident".into(),
        ));
    }
    if src == dst {
        return Ok(Similarity {
            transform: Rigid::identity(),
            scale: 1.0,
        });
    }
    let cs = centroid(src);
    let cd = centroid(dst);
    let mut h = Matrix3::zeros();
    let mut var_src = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let a = s - cs;
        h += (d - cd) * a.transpose();
        var_src += a.norm_squared();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = u * d * vt;
    let scale = if with_scale {
        let sv = svd.singular_values;
        (sv[0] * d[(0, 0)] + sv[1] * d[(1, 1)] + sv[2] * d[(2, 2)]) / var_src
    } else {
        1.0
    };
    let translation = cd - scale * (rotation * cs);
    Ok(Similarity {
        transform: Rigid::new(rotation, translation),
        scale,
    })
}
