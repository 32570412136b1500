//! Frame-tagged 6-DOF quantities and the handful of SO(3) maps the rest of
//! the crate relies on.
//!
//! Rotations are stored as 3×3 matrices rather than quaternions: the
//! impedance law consumes the tool rotation directly as a block-diagonal
//! 6×6 matrix, and the integrator composes body-frame increments with
//! [`Rotation::exp`].

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::{Error, Result};

/// Tolerance on `RᵀR = I` and `det R = 1` accepted by [`Rotation::from_matrix`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Below this value of `1 + trace(R)` the rotation vector is ambiguous.
const NEAR_PI_TRACE_MARGIN: f64 = 1e-6;

/// Which frame a twist or wrench is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    World,
    Body,
    Tool,
}

/// Skew-symmetric matrix such that `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A proper orthonormal 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps `m` after checking orthonormality and handedness.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let err = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !err.is_finite() || err > ORTHONORMAL_TOLERANCE || (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidRotation { orthonormality: err, determinant: det });
        }
        Ok(Self(m))
    }

    /// Wraps `m` without validation. Callers guarantee the invariant.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Builds the rotation whose columns are the given axes.
    pub fn from_axes(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>) -> Result<Self> {
        Self::from_matrix(Matrix3::from_columns(&[x, y, z]))
    }

    /// Rodrigues' formula: rotation by `|rotvec|` about `rotvec / |rotvec|`.
    pub fn exp(rotvec: &Vector3<f64>) -> Self {
        let theta2 = rotvec.norm_squared();
        let k = skew(rotvec);
        let (a, b) = if theta2 < 1e-16 {
            // Taylor coefficients of sin(θ)/θ and (1 − cos θ)/θ².
            (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
        } else {
            let theta = theta2.sqrt();
            (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
        };
        Self(Matrix3::identity() + k * a + k * k * b)
    }

    /// Inverse of [`Rotation::exp`] for angles below π.
    ///
    /// Fails with [`Error::AngleNearPi`] when `trace(R) ≤ −1 + 1e-6`, where the
    /// sign of the rotation axis is no longer determined.
    pub fn log(&self) -> Result<Vector3<f64>> {
        let trace = self.0.trace();
        if trace <= -1.0 + NEAR_PI_TRACE_MARGIN {
            return Err(Error::AngleNearPi { trace });
        }
        Ok(self.log_any())
    }

    /// Rotation vector for any rotation; at exactly π the axis sign is
    /// arbitrary but the result still satisfies `exp(log_any(R)) == R`.
    pub fn log_any(&self) -> Vector3<f64> {
        let m = &self.0;
        let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        let w = vee(&(m - m.transpose())) * 0.5; // sin(θ)·axis
        let sin = w.norm();
        let theta = sin.atan2(cos);
        if theta < 1e-8 {
            return w * (1.0 + theta * theta / 6.0);
        }
        if cos > -0.9 {
            return w * (theta / sin);
        }
        // Near π the antisymmetric part vanishes; recover the axis from the
        // symmetric part (1 − cos θ)·a·aᵀ and take the sign from `w`.
        let sym = (m + m.transpose()) * 0.5 - Matrix3::identity() * cos;
        let diag = sym.diagonal();
        let i = diag.imax();
        let mut axis = sym.column(i) / (diag[i] * (1.0 - cos)).max(f64::MIN_POSITIVE).sqrt();
        axis /= axis.norm();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        axis * theta
    }

    pub fn about_x(angle: f64) -> Self {
        Self::exp(&(Vector3::x() * angle))
    }

    pub fn about_y(angle: f64) -> Self {
        Self::exp(&(Vector3::y() * angle))
    }

    pub fn about_z(angle: f64) -> Self {
        Self::exp(&(Vector3::z() * angle))
    }

    /// Z-Y-X Euler angles (yaw, then pitch, then roll).
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::about_z(yaw) * Self::about_y(pitch) * Self::about_x(roll)
    }

    /// Returns `(roll, pitch, yaw)` for the Z-Y-X convention.
    pub fn to_rpy(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.log_any().norm()
    }

    /// Geodesic distance to `other`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        (self.transpose() * *other).angle()
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }

    /// Gram–Schmidt on the columns, keeping the first column's direction.
    pub fn orthonormalized(&self) -> Self {
        let x = self.0.column(0).normalize();
        let y = self.0.column(1) - x * x.dot(&self.0.column(1));
        let y = y.normalize();
        let z = x.cross(&y);
        Self(Matrix3::from_columns(&[x, y, z]))
    }

    /// Re-orthonormalizes only if accumulated drift exceeds the tolerance.
    pub fn renormalized(self) -> Self {
        if self.orthonormality_error() > ORTHONORMAL_TOLERANCE {
            self.orthonormalized()
        } else {
            self
        }
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Free-function form of [`Rotation::exp`].
pub fn exp_so3(rotvec: &Vector3<f64>) -> Rotation {
    Rotation::exp(rotvec)
}

/// Free-function form of [`Rotation::log`].
pub fn log_so3(r: &Rotation) -> Result<Vector3<f64>> {
    r.log()
}

/// Position in the world frame and orientation world←body.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Rotation,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Rotation) -> Self {
        Self { position, orientation }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// Maps a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation.rotate(local)
    }

    pub fn transform_vector(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.rotate(local)
    }

    /// Maps a point from the parent frame into this pose's local frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.transpose().rotate(&(p - self.position))
    }

    /// `self ∘ child`: the pose of `child` (given relative to `self`) in the parent frame.
    pub fn compose(&self, child: &Pose) -> Pose {
        Pose {
            position: self.transform_point(&child.position),
            orientation: self.orientation * child.orientation,
        }
    }
}

/// Stacked linear and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
    pub frame: Frame,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>, frame: Frame) -> Self {
        Self { linear, angular, frame }
    }

    pub fn zero(frame: Frame) -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros(), frame)
    }

    pub fn from_vector(v: &Vector6<f64>, frame: Frame) -> Self {
        Self::new(v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into(), frame)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        stack(&self.linear, &self.angular)
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|x| x.is_finite())
    }
}

/// Stacked force and torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
    pub frame: Frame,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>, frame: Frame) -> Self {
        Self { force, torque, frame }
    }

    pub fn zero(frame: Frame) -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros(), frame)
    }

    pub fn from_vector(v: &Vector6<f64>, frame: Frame) -> Self {
        Self::new(v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into(), frame)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        stack(&self.force, &self.torque)
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|x| x.is_finite())
    }

    /// Re-expresses the wrench in a frame rotated by `r` (new ← current),
    /// keeping the reference point.
    pub fn rotated(&self, r: &Rotation, frame: Frame) -> Self {
        Self::new(r.rotate(&self.force), r.rotate(&self.torque), frame)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.force * k, self.torque * k, self.frame)
    }
}

impl Add for Wrench {
    type Output = Wrench;

    fn add(self, rhs: Wrench) -> Wrench {
        debug_assert_eq!(self.frame, rhs.frame, "adding wrenches in different frames");
        Wrench::new(self.force + rhs.force, self.torque + rhs.torque, self.frame)
    }
}

impl Sub for Wrench {
    type Output = Wrench;

    fn sub(self, rhs: Wrench) -> Wrench {
        debug_assert_eq!(self.frame, rhs.frame, "subtracting wrenches in different frames");
        Wrench::new(self.force - rhs.force, self.torque - rhs.torque, self.frame)
    }
}

impl Neg for Wrench {
    type Output = Wrench;

    fn neg(self) -> Wrench {
        Wrench::new(-self.force, -self.torque, self.frame)
    }
}

pub(crate) fn stack(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// `blockdiag(R, R)`.
pub fn block_rotation(r: &Rotation) -> Matrix6<f64> {
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(r.matrix());
    out
}

/// Expresses a gain given in the tool frame in the body frame.
///
/// `r_bt` holds the tool axes as columns in body coordinates. A body-frame
/// error `e` reads `Rᵀe` in tool coordinates, so the body-frame gain is
/// `R · G · Rᵀ` with `R = blockdiag(r_bt, r_bt)`. The result is a similarity
/// transform of `gain_tool` and keeps its eigenvalues.
pub fn conjugate_gain(gain_tool: &Matrix6<f64>, r_bt: &Rotation) -> Matrix6<f64> {
    let r = block_rotation(r_bt);
    r * gain_tool * r.transpose()
}

/// Moves a wrench whose force acts at `point` (body frame) to the body origin.
pub fn wrench_at_origin(w: &Wrench, point: &Vector3<f64>) -> Wrench {
    Wrench::new(w.force, w.torque + point.cross(&w.force), w.frame)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    /// Truncated power series of the matrix exponential.
    fn exp_series(rotvec: &Vector3<f64>, terms: usize) -> Matrix3<f64> {
        let k = skew(rotvec);
        let mut term = Matrix3::identity();
        let mut sum = Matrix3::identity();
        for n in 1..terms {
            term = term * k / n as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(Rotation::exp(&Vector3::zeros()), Rotation::identity());
    }

    #[test]
    fn quarter_turn_about_z_maps_x_to_y() {
        let r = Rotation::exp(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        assert_relative_eq!(r * Vector3::x(), Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn exp_matches_power_series() {
        let v = Vector3::new(0.3, -0.2, 0.1);
        let diff = (Rotation::exp(&v).matrix() - exp_series(&v, 20)).abs().max();
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn log_of_identity_and_round_trip() {
        assert_eq!(Rotation::identity().log().unwrap(), Vector3::zeros());
        let v = Vector3::new(0.0, 0.0, 0.5);
        assert_relative_eq!(Rotation::exp(&v).log().unwrap(), v, epsilon = 1e-15);
    }

    #[test]
    fn log_round_trip_at_large_angle() {
        let axis = Vector3::new(0.48, -0.6, 0.64).normalize();
        let v = axis * 2.9;
        assert_relative_eq!(Rotation::exp(&v).log().unwrap(), v, epsilon = 1e-9);
        let v = axis * (PI - 2e-3);
        assert_relative_eq!(Rotation::exp(&v).log().unwrap(), v, epsilon = 1e-9);
    }

    #[test]
    fn log_rejects_half_turn() {
        let r = Rotation::about_x(PI);
        assert!(matches!(r.log(), Err(Error::AngleNearPi { .. })));
        // log_any still inverts exp.
        let back = Rotation::exp(&r.log_any());
        assert!((back.matrix() - r.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn from_matrix_validates() {
        assert!(Rotation::from_matrix(Matrix3::identity() * 2.0).is_err());
        let reflection = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Rotation::from_matrix(reflection).is_err());
        assert!(Rotation::from_matrix(*Rotation::about_y(0.3).matrix()).is_ok());
    }

    #[test]
    fn rpy_round_trip() {
        let r = Rotation::from_rpy(0.1, -0.4, 2.0);
        let (roll, pitch, yaw) = r.to_rpy();
        assert_relative_eq!(roll, 0.1, epsilon = 1e-12);
        assert_relative_eq!(pitch, -0.4, epsilon = 1e-12);
        assert_relative_eq!(yaw, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let mut m = *Rotation::from_rpy(0.3, 0.2, 0.1).matrix();
        m[(0, 1)] += 1e-6;
        let r = Rotation::from_matrix_unchecked(m).renormalized();
        assert!(r.orthonormality_error() < 1e-14);
        assert!((r.matrix().determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn conjugate_gain_identity_cases() {
        let any = Rotation::from_rpy(0.3, -1.1, 2.2);
        let c = conjugate_gain(&Matrix6::identity(), &any);
        assert!((c - Matrix6::identity()).abs().max() < 1e-14);

        let g = Matrix6::from_diagonal(&Vector6::new(5.0, 5.0, 0.25, 5.0, 5.0, 5.0));
        assert_eq!(conjugate_gain(&g, &Rotation::identity()), g);
    }

    #[test]
    fn conjugate_gain_quarter_turn_about_y_swaps_x_and_z() {
        let (a, b, c) = (2.0, 3.0, 7.0);
        let g = Matrix6::from_diagonal(&Vector6::new(a, b, c, 1.0, 1.0, 1.0));
        let r = Rotation::about_y(FRAC_PI_2);
        let out = conjugate_gain(&g, &r);
        // Oracle: explicit entries of R·diag·Rᵀ for R = [[0,0,1],[0,1,0],[-1,0,0]].
        let rm = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
        let expected = rm * Matrix3::from_diagonal(&Vector3::new(a, b, c)) * rm.transpose();
        let block = out.fixed_view::<3, 3>(0, 0).into_owned();
        assert!((block - expected).abs().max() < 1e-14);
        assert_relative_eq!(block.diagonal(), Vector3::new(c, b, a), epsilon = 1e-14);
    }

    #[test]
    fn wrench_at_origin_cases() {
        let r = Vector3::new(0.0, 0.0, -0.5);
        let zero = wrench_at_origin(&Wrench::zero(Frame::Body), &r);
        assert_eq!(zero, Wrench::zero(Frame::Body));

        let w = Wrench::new(Vector3::new(0.0, -1.0, 0.0), Vector3::zeros(), Frame::Body);
        let out = wrench_at_origin(&w, &r);
        assert_relative_eq!(out.torque, Vector3::new(-0.5, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(out.force, w.force);

        let w = Wrench::new(Vector3::x(), Vector3::new(0.1, 0.2, 0.3), Frame::Body);
        assert_eq!(wrench_at_origin(&w, &Vector3::zeros()), w);
    }

    fn rotvec_below_pi() -> impl Strategy<Value = Vector3<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..(PI - 1e-3)).prop_filter_map(
            "non-degenerate axis",
            |(x, y, z, angle)| {
                let axis = Vector3::new(x, y, z);
                (axis.norm() > 1e-3).then(|| axis.normalize() * angle)
            },
        )
    }

    proptest! {
        #[test]
        fn log_inverts_exp(v in rotvec_below_pi()) {
            let back = Rotation::exp(&v).log().unwrap();
            prop_assert!((back - v).abs().max() < 1e-9);
        }

        #[test]
        fn conjugation_preserves_eigenvalues(
            d in proptest::array::uniform6(0.05..10.0f64),
            v in rotvec_below_pi(),
        ) {
            let g = Matrix6::from_diagonal(&Vector6::from_row_slice(&d));
            let c = conjugate_gain(&g, &Rotation::exp(&v));
            let mut got: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
            let mut want = d.to_vec();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((c - c.transpose()).abs().max() < 1e-12);
        }

        #[test]
        fn wrench_at_origin_is_linear_in_force(
            f1 in proptest::array::uniform3(-10.0..10.0f64),
            f2 in proptest::array::uniform3(-10.0..10.0f64),
            r in proptest::array::uniform3(-1.0..1.0f64),
            k in -3.0..3.0f64,
        ) {
            let r = Vector3::from(r);
            let w = |f: Vector3<f64>| wrench_at_origin(&Wrench::new(f, Vector3::zeros(), Frame::Body), &r);
            let (f1, f2) = (Vector3::from(f1), Vector3::from(f2));
            let lhs = w(f1 * k + f2).to_vector();
            let rhs = w(f1).to_vector() * k + w(f2).to_vector();
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }
    }
}
