use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{is_rotation, orthonormalize, Rigid};

/// Camera-to-world pose at a timestamp (seconds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub timestamp: f64,
}

impl Pose {
    pub fn identity(timestamp: f64) -> Self {
        Pose::from_rigid(Rigid::identity(), timestamp)
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, timestamp: f64) -> Result<Self> {
        if !is_rotation(&rotation, 1e-6) {
            return Err(Error::InvalidArgument("pose rotation is not orthonormal".into()));
        }
        Ok(Pose {
            rotation: orthonormalize(&rotation),
            translation,
            timestamp,
        })
    }

    pub fn from_rigid(t: Rigid, timestamp: f64) -> Self {
        Pose {
            rotation: t.rotation,
            translation: t.translation,
            timestamp,
        }
    }

    /// `(tx ty tz qx qy qz qw)` ordering is used by the TUM writer.
    pub fn from_tum(timestamp: f64, t: [f64; 3], q: [f64; 4]) -> Result<Self> {
        let quat = nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]);
        let n = quat.norm();
        if !(n > 1e-9) || !n.is_finite() {
            return Err(Error::InvalidArgument("quaternion has zero norm".into()));
        }
        let r = UnitQuaternion::from_quaternion(quat);
        Ok(Pose::from_rigid(
            Rigid::from_quaternion(r, Vector3::new(t[0], t[1], t[2])),
            timestamp,
        ))
    }

    pub fn rigid(&self) -> Rigid {
        Rigid::new(self.rotation, self.translation)
    }

    /// `[qx, qy, qz, qw]` with `qw ≥ 0`.
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.rigid().quaternion();
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.i, s * q.j, s * q.k, s * q.w]
    }
}

/// Poses with strictly increasing timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::EmptyInput("trajectory has no poses".into()));
        }
        if poses.windows(2).any(|w| !(w[1].timestamp > w[0].timestamp)) {
            return Err(Error::InvalidArgument(
                "trajectory timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Trajectory { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.poses.iter().map(|p| p.timestamp).collect()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(|p| p.translation).collect()
    }

    /// Applies `t` on the left of every pose.
    pub fn transformed(&self, t: &Rigid) -> Trajectory {
        Trajectory {
            poses: self
                .poses
                .iter()
                .map(|p| Pose::from_rigid(t.compose(&p.rigid()), p.timestamp))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_must_increase() {
        assert!(Trajectory::new(vec![]).is_err());
        assert!(Trajectory::new(vec![Pose::identity(1.0), Pose::identity(1.0)]).is_err());
        assert!(Trajectory::new(vec![Pose::identity(1.0), Pose::identity(1.5)]).is_ok());
    }

    #[test]
    fn tum_round_trip() {
        let r = Rigid::from_axis_angle(Vector3::new(0.2, 1.0, -0.3), 1.1, Vector3::new(1.0, 2.0, 3.0));
        let p = Pose::from_rigid(r, 4.5);
        let q = p.quaternion_xyzw();
        let t = p.translation;
        let back = Pose::from_tum(4.5, [t.x, t.y, t.z], q).unwrap();
        assert!(back.rigid().rotation_error(&r) < 1e-12);
        assert!(Pose::from_tum(0.0, [0.0; 3], [0.0; 4]).is_err());
    }
}
