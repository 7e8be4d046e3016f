//! Frame-tagged linear algebra and attitude representations.
//!
//! Vectors and rotations carry coordinate-frame tags (`b`, `n`, `b(0)`,
//! `n(0)`, `e`). The tags are metadata: they cost nothing in release builds,
//! but every arithmetic combination of mismatched frames trips a
//! `debug_assert` in debug/test builds. Quaternions are the internal
//! integration representation; direction cosine matrices are the API surface
//! and are renormalized on conversion.
//!
//! Conventions: navigation frame is NED (north-east-down), body frame is
//! forward-right-down, rotation vectors follow the right-hand rule, and
//! `R = exp(skew(phi))` rotates a vector by `‖phi‖` about `phi/‖phi‖`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Untagged 3x3 real matrix, used for skew-symmetric operators and other
/// frame-free intermediates.
pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum AttitudeError {
    /// Rotation vector magnitude at or beyond the principal range.
    #[error("rotation vector magnitude {0} rad is outside the principal range [0, pi)")]
    OutOfPrincipalRange(f64),
    /// Matrix failed the orthonormality/determinant check.
    #[error("matrix is not a rotation: orthonormality defect {defect:.3e}, det {det:.6}")]
    NotARotation { defect: f64, det: f64 },
}

/// Coordinate frame tag.
///
/// `Body0`/`Nav0` are the body and navigation frames frozen (non-rotating)
/// at the alignment start epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Body frame, forward-right-down.
    Body,
    /// Navigation frame, north-east-down.
    Nav,
    /// Body frame frozen at t = 0.
    Body0,
    /// Navigation frame frozen at t = 0.
    Nav0,
    /// Earth-centered earth-fixed.
    Ecef,
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Frame::Body => "b",
            Frame::Nav => "n",
            Frame::Body0 => "b0",
            Frame::Nav0 => "n0",
            Frame::Ecef => "e",
        };
        write!(f, "{s}")
    }
}

/// A 3-vector with a coordinate-frame tag.
#[derive(Clone, Copy, Debug)]
pub struct FrameVector {
    v: Vector3<f64>,
    frame: Frame,
}

impl FrameVector {
    pub fn new(frame: Frame, x: f64, y: f64, z: f64) -> Self {
        Self::from_vector(frame, Vector3::new(x, y, z))
    }

    pub fn from_vector(frame: Frame, v: Vector3<f64>) -> Self {
        let fv = Self { v, frame };
        fv.debug_check_finite();
        fv
    }

    pub fn zero(frame: Frame) -> Self {
        Self {
            v: Vector3::zeros(),
            frame,
        }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.v
    }

    pub fn x(&self) -> f64 {
        self.v.x
    }

    pub fn y(&self) -> f64 {
        self.v.y
    }

    pub fn z(&self) -> f64 {
        self.v.z
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn dot(&self, other: &FrameVector) -> f64 {
        self.debug_check_frame(other);
        self.v.dot(&other.v)
    }

    pub fn cross(&self, other: &FrameVector) -> FrameVector {
        self.debug_check_frame(other);
        Self::from_vector(self.frame, self.v.cross(&other.v))
    }

    /// Reinterpret the components in another frame. This is a deliberate
    /// frame-freeze (e.g. `b` at t = 0 becomes `b(0)`), not a rotation.
    pub fn retagged(&self, frame: Frame) -> FrameVector {
        Self { v: self.v, frame }
    }

    fn debug_check_frame(&self, other: &FrameVector) {
        debug_assert_eq!(
            self.frame, other.frame,
            "frame mismatch: {} vs {}",
            self.frame, other.frame
        );
    }

    fn debug_check_finite(&self) {
        debug_assert!(
            self.v.iter().all(|c| c.is_finite()),
            "non-finite component in {} vector: {:?}",
            self.frame,
            self.v
        );
    }
}

impl std::ops::Add for FrameVector {
    type Output = FrameVector;
    fn add(self, rhs: FrameVector) -> FrameVector {
        self.debug_check_frame(&rhs);
        FrameVector::from_vector(self.frame, self.v + rhs.v)
    }
}

impl std::ops::Sub for FrameVector {
    type Output = FrameVector;
    fn sub(self, rhs: FrameVector) -> FrameVector {
        self.debug_check_frame(&rhs);
        FrameVector::from_vector(self.frame, self.v - rhs.v)
    }
}

impl std::ops::Neg for FrameVector {
    type Output = FrameVector;
    fn neg(self) -> FrameVector {
        FrameVector::from_vector(self.frame, -self.v)
    }
}

impl std::ops::Mul<f64> for FrameVector {
    type Output = FrameVector;
    fn mul(self, rhs: f64) -> FrameVector {
        FrameVector::from_vector(self.frame, self.v * rhs)
    }
}

/// Skew-symmetric (cross-product) operator: `skew(v) * w == v x w`.
pub fn skew(v: &FrameVector) -> Mat3 {
    skew3(&v.vector())
}

pub(crate) fn skew3(v: &Vector3<f64>) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Unit quaternion between two tagged frames; same linear map as the
/// corresponding [`RotationMatrix`] (`q.to_dcm().apply(v)` rotates `from`
/// coordinates into `to` coordinates). Hamilton product convention.
#[derive(Clone, Copy, Debug)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    from: Frame,
    to: Frame,
}

impl UnitQuaternion {
    pub fn identity(from: Frame, to: Frame) -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
            from,
            to,
        }
    }

    pub fn new_normalized(w: f64, x: f64, y: f64, z: f64, from: Frame, to: Frame) -> Self {
        Self {
            w,
            x,
            y,
            z,
            from,
            to,
        }
        .normalized()
    }

    /// Quaternion of the rotation vector `phi` (half-angle form), acting
    /// within the vector's own frame.
    pub fn from_rotvec(phi: &FrameVector) -> Self {
        let theta = phi.norm();
        let half = 0.5 * theta;
        // sin(theta/2)/theta, series-expanded near zero
        let k = if theta > 1e-6 {
            half.sin() / theta
        } else {
            0.5 - theta * theta / 48.0
        };
        let v = phi.vector();
        Self {
            w: half.cos(),
            x: k * v.x,
            y: k * v.y,
            z: k * v.z,
            from: phi.frame(),
            to: phi.frame(),
        }
        .normalized()
    }

    pub fn from_frame(&self) -> Frame {
        self.from
    }

    pub fn to_frame(&self) -> Frame {
        self.to
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        debug_assert!(n > 0.0 && n.is_finite(), "degenerate quaternion norm {n}");
        self.w /= n;
        self.x /= n;
        self.y /= n;
        self.z /= n;
        self
    }

    /// Inverse rotation; frame tags swap.
    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
            from: self.to,
            to: self.from,
        }
    }

    /// Four-component dot product (`±q` detection in round-trip checks).
    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Rotation matrix with the same frame tags, renormalized on conversion.
    pub fn to_dcm(&self) -> RotationMatrix {
        let q = self.normalized();
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        let m = Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        RotationMatrix {
            m,
            from: q.from,
            to: q.to,
        }
    }

    /// Principal rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        let vec_norm = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * vec_norm.atan2(self.w.abs())
    }
}

/// Hamilton product `a ∘ b`; the composed map applies `b` first. Frame tags
/// must chain (`b.to == a.from`).
pub fn quat_multiply(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    debug_assert_eq!(
        a.from, b.to,
        "quaternion frame chain mismatch: {}<-{} applied to {}<-{}",
        a.to, a.from, b.to, b.from
    );
    UnitQuaternion {
        w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        from: b.from,
        to: a.to,
    }
    .normalized()
}

/// Direction cosine matrix between two tagged frames.
///
/// `apply` maps `from`-frame coordinates to `to`-frame coordinates.
#[derive(Clone, Copy, Debug)]
pub struct RotationMatrix {
    m: Mat3,
    from: Frame,
    to: Frame,
}

impl RotationMatrix {
    pub fn identity(from: Frame, to: Frame) -> Self {
        Self {
            m: Mat3::identity(),
            from,
            to,
        }
    }

    /// Validating constructor: rejects matrices with orthonormality defect
    /// above 1e-9 or determinant off unity by more than 1e-9.
    pub fn from_matrix(m: Mat3, from: Frame, to: Frame) -> Result<Self, AttitudeError> {
        let r = Self { m, from, to };
        let defect = r.orthonormality_defect();
        let det = r.m.determinant();
        if defect > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(AttitudeError::NotARotation { defect, det });
        }
        Ok(r)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    pub fn from_frame(&self) -> Frame {
        self.from
    }

    pub fn to_frame(&self) -> Frame {
        self.to
    }

    /// Inverse rotation; frame tags swap.
    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose(),
            from: self.to,
            to: self.from,
        }
    }

    /// Rotate a vector from the `from` frame into the `to` frame.
    pub fn apply(&self, v: &FrameVector) -> FrameVector {
        debug_assert_eq!(
            v.frame(),
            self.from,
            "rotation expects {} input, got {}",
            self.from,
            v.frame()
        );
        FrameVector::from_vector(self.to, self.m * v.vector())
    }

    /// Reinterpret the frame tags (e.g. freeze `b -> n` at t = 0 into
    /// `b(0) -> n(0)`). The matrix is unchanged.
    pub fn retagged(&self, from: Frame, to: Frame) -> Self {
        Self {
            m: self.m,
            from,
            to,
        }
    }

    /// Max-abs entry of `R Rᵀ - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let d = self.m * self.m.transpose() - Mat3::identity();
        d.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    /// Principal rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        dcm_to_quat(self).angle()
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;
    /// Composition `self ∘ rhs` (apply `rhs` first); tags must chain.
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        debug_assert_eq!(
            self.from, rhs.to,
            "rotation frame chain mismatch: {}<-{} applied to {}<-{}",
            self.to, self.from, rhs.to, rhs.from
        );
        RotationMatrix {
            m: self.m * rhs.m,
            from: rhs.from,
            to: self.to,
        }
    }
}

impl std::ops::Mul<FrameVector> for RotationMatrix {
    type Output = FrameVector;
    fn mul(self, rhs: FrameVector) -> FrameVector {
        self.apply(&rhs)
    }
}

/// Rodrigues rotation of a principal rotation vector (`‖phi‖ < pi`).
pub fn dcm_from_rotvec(phi: &FrameVector) -> Result<RotationMatrix, AttitudeError> {
    let theta = phi.norm();
    if theta >= std::f64::consts::PI {
        return Err(AttitudeError::OutOfPrincipalRange(theta));
    }
    Ok(UnitQuaternion::from_rotvec(phi).to_dcm())
}

/// Quaternion from a rotation matrix (Shepperd's method: branch on the
/// largest of the four squared components for numerical stability).
pub fn dcm_to_quat(r: &RotationMatrix) -> UnitQuaternion {
    let m = r.m;
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let (w, x, y, z) = if trace > m[(0, 0)] && trace > m[(1, 1)] && trace > m[(2, 2)] {
        let s = (1.0 + trace).sqrt() * 2.0;
        (
            0.25 * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        )
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        (
            (m[(2, 1)] - m[(1, 2)]) / s,
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        )
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 - m[(0, 0)] + m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        (
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        )
    } else {
        let s = (1.0 - m[(0, 0)] - m[(1, 1)] + m[(2, 2)]).sqrt() * 2.0;
        (
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
        )
    };
    UnitQuaternion {
        w,
        x,
        y,
        z,
        from: r.from,
        to: r.to,
    }
    .normalized()
}

/// Attitude from aerospace yaw(z)-pitch(y)-roll(x) Euler angles:
/// `R = R_z(yaw) R_y(pitch) R_x(roll)`.
pub fn dcm_from_euler(yaw: f64, pitch: f64, roll: f64, from: Frame, to: Frame) -> RotationMatrix {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let m = Mat3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    );
    RotationMatrix { m, from, to }
}

/// Reassemble the current attitude from the chain factorization:
/// `C_b^n(t) = C_n(0)^n(t) · C_b(0)^n(0) · C_b(t)^b(0)`.
///
/// Arguments in application order from the right: `c_b_b0` is the gyro-driven
/// body chain (`b -> b(0)`), `c_b0_n0` the constant initial attitude
/// (`b(0) -> n(0)`), and `c_n0_n` the unwound navigation chain
/// (`n(0) -> n`, i.e. the transpose of the integrated `n -> n(0)` chain).
pub fn compose_attitude(
    c_n0_n: &RotationMatrix,
    c_b0_n0: &RotationMatrix,
    c_b_b0: &RotationMatrix,
) -> RotationMatrix {
    debug_assert_eq!(c_n0_n.from, Frame::Nav0);
    debug_assert_eq!(c_n0_n.to, Frame::Nav);
    debug_assert_eq!(c_b0_n0.from, Frame::Body0);
    debug_assert_eq!(c_b0_n0.to, Frame::Nav0);
    debug_assert_eq!(c_b_b0.from, Frame::Body);
    debug_assert_eq!(c_b_b0.to, Frame::Body0);
    *c_n0_n * *c_b0_n0 * *c_b_b0
}

/// Yaw/pitch/roll of an attitude in the z-y-x convention (inverse of
/// [`dcm_from_euler`]). Away from the |pitch| = pi/2 singularity.
pub fn euler_from_dcm(r: &RotationMatrix) -> (f64, f64, f64) {
    let m = r.m;
    let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    (yaw, pitch, roll)
}

/// Euler-angle attitude errors extracted from `C_est · C_trueᵀ`.
#[derive(Clone, Copy, Debug)]
pub struct AttitudeErrors {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
    /// Pitch error at ±pi/2: yaw and roll are indistinguishable and their
    /// combined angle is reported as yaw.
    pub gimbal_lock: bool,
}

impl AttitudeErrors {
    pub fn max_abs(&self) -> f64 {
        self.pitch.abs().max(self.roll.abs()).max(self.yaw.abs())
    }
}

/// Pitch/roll/yaw errors of an estimated attitude against truth, both
/// expressed as `b -> n` at the same epoch. Zero iff the matrices are equal.
pub fn attitude_error_angles(c_est: &RotationMatrix, c_true: &RotationMatrix) -> AttitudeErrors {
    debug_assert_eq!(c_est.from, c_true.from);
    debug_assert_eq!(c_est.to, c_true.to);
    if c_est.m == c_true.m {
        return AttitudeErrors {
            pitch: 0.0,
            roll: 0.0,
            yaw: 0.0,
            gimbal_lock: false,
        };
    }
    let d = c_est.m * c_true.m.transpose();
    let sin_pitch = -d[(2, 0)];
    if sin_pitch.abs() > 1.0 - 1e-12 {
        // gimbal lock: only yaw+roll (or yaw-roll) observable
        let combined = (-d[(0, 1)]).atan2(d[(1, 1)]);
        return AttitudeErrors {
            pitch: std::f64::consts::FRAC_PI_2.copysign(sin_pitch),
            roll: 0.0,
            yaw: combined,
            gimbal_lock: true,
        };
    }
    AttitudeErrors {
        pitch: sin_pitch.asin(),
        roll: d[(2, 1)].atan2(d[(2, 2)]),
        yaw: d[(1, 0)].atan2(d[(0, 0)]),
        gimbal_lock: false,
    }
}
