//! Rigid-body poses and the SE(3)/SO(3) helpers the relative-pose solver needs.

use nalgebra::{Matrix3, Vector3, Vector6};

/// A rigid transform mapping body coordinates into world coordinates:
/// `p_world = rotation * p_body + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose3 {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Planar pose: position `(x, y, 0)` and a rotation of `yaw` about +z.
    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            rotation: rot_z(yaw),
            translation: Vector3::new(x, y, 0.0),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `R^T (p - t)`: world point into this pose's body frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Pose3) -> Pose3 {
        Pose3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose3 {
        let rt = self.rotation.transpose();
        Pose3 {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Heading of the body x axis projected on the ground plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// Left perturbation `Exp(xi) ∘ self`, with `xi = (rho, phi)`.
    pub fn perturb_left(&self, xi: &Vector6<f64>) -> Pose3 {
        let mut p = se3_exp(xi).compose(self);
        p.rotation = orthonormalize(&p.rotation);
        p
    }

    /// Rotation orthonormality and handedness within `tol`.
    pub fn is_valid_rotation(&self, tol: f64) -> bool {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max() <= tol;
        ortho && (r.determinant() - 1.0).abs() <= tol
    }

    pub fn translation_distance(&self, other: &Pose3) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Geodesic angle (radians) between the two rotations.
    pub fn rotation_angle_to(&self, other: &Pose3) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }
}

pub fn rot_z(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Angle of a rotation matrix, `acos((tr R - 1) / 2)` clamped to the valid domain.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

/// SO(3) exponential (Rodrigues).
pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < 1e-8 {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * k * k
}

/// SO(3) logarithm as a rotation vector.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let theta = rotation_angle(r);
    let w = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if theta < 1e-8 {
        return 0.5 * w;
    }
    if std::f64::consts::PI - theta < 1e-6 {
        // Near pi the antisymmetric part vanishes; read the axis off the symmetric part.
        let s = (r + Matrix3::identity()) * 0.5;
        let (i, _) = s.diagonal().argmax();
        let mut axis: Vector3<f64> = s.column(i).into();
        axis /= axis.norm();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        return axis * theta;
    }
    w * (theta / (2.0 * theta.sin()))
}

/// SE(3) exponential of `xi = (rho, phi)`.
pub fn se3_exp(xi: &Vector6<f64>) -> Pose3 {
    let rho = Vector3::new(xi[0], xi[1], xi[2]);
    let phi = Vector3::new(xi[3], xi[4], xi[5]);
    let theta = phi.norm();
    let k = skew(&phi);
    let v = if theta < 1e-8 {
        Matrix3::identity() + 0.5 * k + k * k / 6.0
    } else {
        let t2 = theta * theta;
        Matrix3::identity()
            + (1.0 - theta.cos()) / t2 * k
            + (theta - theta.sin()) / (t2 * theta) * k * k
    };
    Pose3 {
        rotation: so3_exp(&phi),
        translation: v * rho,
    }
}

/// Nearest rotation matrix in the Frobenius sense.
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_log_round_trip() {
        for phi in [
            Vector3::new(0.1, -0.2, 0.3),
            Vector3::new(1e-10, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 3.0),
        ] {
            let back = so3_log(&so3_exp(&phi));
            assert!((back - phi).norm() < 1e-9, "{phi:?} -> {back:?}");
        }
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let p = Pose3::new(so3_exp(&Vector3::new(0.3, 0.1, -0.7)), Vector3::new(1.0, -2.0, 0.5));
        let id = p.compose(&p.inverse());
        assert!((id.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
        assert!(p.is_valid_rotation(1e-9));
    }

    #[test]
    fn planar_yaw_round_trips() {
        let p = Pose3::planar(1.0, 2.0, -2.5);
        assert!((p.yaw() + 2.5).abs() < 1e-12);
    }
}
