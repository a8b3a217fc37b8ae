//! Rotation-group algebra on SO(3).
//!
//! Rotations map body-frame vectors to the inertial (NED) frame. All maps here are pure
//! functions over `nalgebra` fixed-size types.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthonormality and determinant tolerance of [`Rotation`].
pub const ROTATION_TOL: f64 = 1e-9;

const TAYLOR_THRESHOLD: f64 = 1e-8;
const NEAR_PI_MARGIN: f64 = 1e-6;

/// Cross-product matrix: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]. Rejects matrices whose symmetric part exceeds `1e-9`.
pub fn unskew(m: &Mat3) -> Result<Vec3> {
    let sym = (m + m.transpose()).norm();
    if sym > 1e-9 {
        return Err(Error::NotAntisymmetric(sym));
    }
    Ok(vee_antisymmetric(m))
}

// vee of the antisymmetric part, no check
fn vee_antisymmetric(m: &Mat3) -> Vec3 {
    Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    ) * 0.5
}

/// A 3×3 orthonormal matrix with unit determinant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat3", into = "Mat3")]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates `m` against the orthonormality and determinant tolerances.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rotation matrix"));
        }
        let ortho = (m.transpose() * m - Mat3::identity()).norm();
        let det = m.determinant();
        if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotRotation(format!(
                "|R^T R - I| = {ortho:e}, det = {det}"
            )));
        }
        Ok(Rotation(m))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Frobenius norm of `R^T R - I`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }

    pub fn from_quaternion(q: &UnitQuaternion) -> Self {
        let (w, v) = (q.q0, q.q);
        // Rodrigues form I + 2 q^x (q0 I + q^x)
        let qx = skew(&v);
        Rotation(Mat3::identity() + 2.0 * qx * (w * Mat3::identity() + qx))
    }

    /// Unit quaternion with non-negative scalar part.
    pub fn to_quaternion(&self) -> UnitQuaternion {
        let m = &self.0;
        let tr = m.trace();
        // Shepperd: branch on the largest of (q0², q1², q2², q3²)
        let (w, x, y, z) = if tr > m[(0, 0)] && tr > m[(1, 1)] && tr > m[(2, 2)] {
            let s = 2.0 * (1.0 + tr).sqrt();
            (
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            (
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
            (
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
            (
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let sign = if w < 0.0 { -1.0 } else { 1.0 };
        UnitQuaternion {
            q0: sign * w / n,
            q: Vec3::new(x, y, z) * (sign / n),
        }
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl TryFrom<Mat3> for Rotation {
    type Error = Error;
    fn try_from(m: Mat3) -> Result<Self> {
        Rotation::from_matrix(m)
    }
}

impl From<Rotation> for Mat3 {
    fn from(r: Rotation) -> Mat3 {
        r.0
    }
}

/// Unit quaternion `(q0, q)` with scalar part `q0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub q0: f64,
    pub q: Vec3,
}

impl UnitQuaternion {
    /// Normalizes `(w, x, y, z)`; rejects zero or non-finite input.
    pub fn new_normalize(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::Invalid(format!("quaternion norm {n}")));
        }
        Ok(UnitQuaternion {
            q0: w / n,
            q: Vec3::new(x, y, z) / n,
        })
    }

    pub fn norm_squared(&self) -> f64 {
        self.q0 * self.q0 + self.q.norm_squared()
    }

    pub fn negate(&self) -> Self {
        UnitQuaternion {
            q0: -self.q0,
            q: -self.q,
        }
    }
}

/// Rodrigues exponential `exp(v^x)`.
pub fn exp_so3(v: &Vec3) -> Rotation {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < TAYLOR_THRESHOLD {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = skew(v);
    Rotation(Mat3::identity() + a * k + b * k * k)
}

/// Rotation vector of `r`; rejects angles within `1e-6` of π.
pub fn log_so3(r: &Rotation) -> Result<Vec3> {
    let m = r.matrix();
    let w = vee_antisymmetric(m); // sin(theta) * axis
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let s = w.norm();
    let theta = s.atan2(c);
    if theta > std::f64::consts::PI - NEAR_PI_MARGIN {
        return Err(Error::NearPi { angle: theta });
    }
    if theta < TAYLOR_THRESHOLD {
        return Ok(w * (1.0 + theta * theta / 6.0));
    }
    if theta < 3.0 {
        return Ok(w * (theta / s));
    }
    // sin(theta) is small here; recover the axis from the symmetric part instead.
    let b = (m + m.transpose()) * 0.5 - Mat3::identity() * c;
    let k = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let mut axis = b.column(k).into_owned().normalize();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// First-order error coordinates `2 sign(q0) q` of `rtilde`.
///
/// Satisfies `rtilde = I + skew(lambda) + O(|lambda|^2)` and lies in the closed ball of radius 2.
pub fn error_lambda(rtilde: &Rotation) -> Result<Vec3> {
    let q = rtilde.to_quaternion();
    if q.q0.abs() < 1e-9 {
        return Err(Error::NearPi {
            angle: std::f64::consts::PI,
        });
    }
    Ok(q.q * (2.0 * q.q0.signum()))
}

/// Rotation angle of `r1 r2^T`, in `[0, π]`.
pub fn angular_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    // |R1 - R2|_F = 2 sqrt(2) sin(θ/2), well conditioned near zero
    let chord = (r1.matrix() - r2.matrix()).norm() / (2.0 * std::f64::consts::SQRT_2);
    2.0 * chord.min(1.0).asin()
}

/// Nearest rotation in Frobenius norm (orthogonal polar factor).
pub fn project_to_so3(m: &Mat3) -> Result<Rotation> {
    let det = m.determinant();
    if !det.is_finite() || det <= 1e-12 {
        return Err(Error::SingularOrReflecting(det));
    }
    let eig = SymmetricEigen::new(m.transpose() * m);
    let inv_sqrt = Vector3::from_iterator(eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let s_inv = eig.eigenvectors * Mat3::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let r = m * s_inv;
    // one Newton polish step toward exact orthonormality
    let r = 0.5 * (r + r.transpose().try_inverse().unwrap_or(r));
    Ok(Rotation(r))
}

/// Intrinsic Z-Y-X Euler angles, radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerZyx {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Set at |pitch| = π/2, where yaw is fixed to zero.
    pub gimbal_locked: bool,
}

/// Decomposes `r = Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn euler_zyx(r: &Rotation) -> EulerZyx {
    let m = r.matrix();
    let sp = (-m[(2, 0)]).clamp(-1.0, 1.0);
    let pitch = sp.asin();
    if sp.abs() > 1.0 - 1e-12 {
        // yaw and roll are coupled; put everything in roll
        let roll = (m[(0, 1)] * sp).atan2(m[(0, 2)] * sp);
        return EulerZyx {
            roll,
            pitch,
            yaw: 0.0,
            gimbal_locked: true,
        };
    }
    EulerZyx {
        roll: m[(2, 1)].atan2(m[(2, 2)]),
        pitch,
        yaw: m[(1, 0)].atan2(m[(0, 0)]),
        gimbal_locked: false,
    }
}

/// Inverse of [`euler_zyx`].
pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Rotation {
    let rz = exp_so3(&Vec3::new(0.0, 0.0, yaw));
    let ry = exp_so3(&Vec3::new(0.0, pitch, 0.0));
    let rx = exp_so3(&Vec3::new(roll, 0.0, 0.0));
    rz * ry * rx
}
