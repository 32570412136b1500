//! Wrench allocation for six tilting double-rotor groups.
//!
//! Each group `i` sits at azimuth `θ_i = i·60°` and distance `L` from the
//! body origin and tilts by `α_i` about its arm. Writing the group thrust as
//! an axial part along `z_b` and a lateral part along the arm tangent
//! `t_i = (sin θ_i, −cos θ_i, 0)` makes the map to body wrench linear:
//!
//! ```text
//! f_i^ax = T_i cos α_i      f_i^lat = T_i sin α_i
//! ```
//!
//! The decision vector interleaves the pairs: `x = (f_0^ax, f_0^lat, f_1^ax, …)`.

use nalgebra::{SMatrix, SVector, Vector2, Vector3, Vector6};

use crate::geometry::{Frame, Wrench};
use crate::{Error, Result};

pub const GROUPS: usize = 6;
pub const ROTORS: usize = 12;

/// Group thrust below which the previous tilt is kept [N].
pub const TILT_HOLD_THRUST: f64 = 0.05;

pub type AllocationMatrix = SMatrix<f64, 6, 12>;
pub type DecisionVector = SVector<f64, 12>;

/// Rotor speeds and tilt angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorCommand {
    /// [rad/s], two consecutive entries per group.
    pub rotor_speeds: [f64; ROTORS],
    /// [rad], wrapped to [−π, π].
    pub tilt_angles: [f64; GROUPS],
}

impl Default for ActuatorCommand {
    fn default() -> Self {
        Self { rotor_speeds: [0.0; ROTORS], tilt_angles: [0.0; GROUPS] }
    }
}

impl ActuatorCommand {
    /// Thrust of each group [N].
    pub fn group_thrusts(&self, geom: &AllocatorGeometry) -> [f64; GROUPS] {
        let mut out = [0.0; GROUPS];
        for (i, t) in out.iter_mut().enumerate() {
            *t = (0..geom.rotors_per_group)
                .map(|k| {
                    let w = self.rotor_speeds[i * geom.rotors_per_group + k];
                    geom.thrust_coefficient * w * w
                })
                .sum();
        }
        out
    }
}

/// Arm layout and rotor constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocatorGeometry {
    /// [m]
    pub arm_length: f64,
    /// Thrust per rotor = c_f ω² [N·s²/rad²].
    pub thrust_coefficient: f64,
    /// Drag torque per rotor = c_d ω² [N·m·s²/rad²].
    pub drag_coefficient: f64,
    /// +1 for counter-clockwise, −1 for clockwise (seen from above at zero tilt).
    pub spins: [f64; GROUPS],
    pub rotors_per_group: usize,
    /// [N]
    pub max_group_thrust: f64,
}

impl Default for AllocatorGeometry {
    fn default() -> Self {
        // 10 N per rotor at 1000 rad/s.
        let c_f = 1e-5;
        Self {
            arm_length: 0.3,
            thrust_coefficient: c_f,
            drag_coefficient: 0.016 * c_f,
            spins: [1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
            rotors_per_group: 2,
            max_group_thrust: 20.0,
        }
    }
}

impl AllocatorGeometry {
    pub fn from_params(params: &crate::dynamics::VehicleParams) -> Self {
        Self {
            arm_length: params.group_distance,
            max_group_thrust: params.max_group_thrust,
            rotors_per_group: params.rotors_per_group,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arm_length > 0.0) || !(self.thrust_coefficient > 0.0) {
            return Err(Error::InvalidParameter("arm length and thrust coefficient must be positive".into()));
        }
        if self.rotors_per_group == 0 || self.rotors_per_group * GROUPS != ROTORS {
            return Err(Error::InvalidParameter("expected two rotors per group".into()));
        }
        if self.spins.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::InvalidParameter("spin directions must be ±1".into()));
        }
        Ok(())
    }

    pub fn azimuth(&self, group: usize) -> f64 {
        group as f64 * std::f64::consts::FRAC_PI_3
    }

    /// Arm position in the body frame.
    pub fn arm_position(&self, group: usize) -> Vector3<f64> {
        let th = self.azimuth(group);
        Vector3::new(th.cos(), th.sin(), 0.0) * self.arm_length
    }

    /// Unit tangent the lateral thrust component points along.
    pub fn tangent(&self, group: usize) -> Vector3<f64> {
        let th = self.azimuth(group);
        Vector3::new(th.sin(), -th.cos(), 0.0)
    }

    /// Thrust direction of a group tilted by `alpha`.
    pub fn thrust_direction(&self, group: usize, alpha: f64) -> Vector3<f64> {
        Vector3::z() * alpha.cos() + self.tangent(group) * alpha.sin()
    }

    fn drag_ratio(&self) -> f64 {
        self.drag_coefficient / self.thrust_coefficient
    }

    /// Rotor speed producing `thrust` on a whole group.
    pub fn rotor_speed_for(&self, thrust: f64) -> f64 {
        (thrust.max(0.0) / self.rotors_per_group as f64 / self.thrust_coefficient).sqrt()
    }
}

/// Body wrench per unit of group thrust along `d`, including rotor drag.
fn unit_wrench(geom: &AllocatorGeometry, group: usize, d: &Vector3<f64>) -> Vector6<f64> {
    let torque = geom.arm_position(group).cross(d) + d * (geom.spins[group] * geom.drag_ratio());
    Vector6::new(d.x, d.y, d.z, torque.x, torque.y, torque.z)
}

/// Linear map from the decision vector to body wrench.
pub fn allocation_matrix(geom: &AllocatorGeometry) -> AllocationMatrix {
    let mut a = AllocationMatrix::zeros();
    for i in 0..GROUPS {
        a.set_column(2 * i, &unit_wrench(geom, i, &Vector3::z()));
        a.set_column(2 * i + 1, &unit_wrench(geom, i, &geom.tangent(i)));
    }
    a
}

/// `Aᵀ(AAᵀ)⁻¹`, the minimum-norm right inverse.
pub fn pseudo_inverse(a: &AllocationMatrix) -> Result<SMatrix<f64, 12, 6>> {
    let aat = a * a.transpose();
    let inv = aat
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("allocation matrix is rank deficient".into()))?
        .inverse();
    Ok(a.transpose() * inv)
}

/// Exact actuator-to-wrench map.
pub fn forward_wrench(cmd: &ActuatorCommand, geom: &AllocatorGeometry) -> Wrench {
    let thrusts = cmd.group_thrusts(geom);
    let mut w = Vector6::zeros();
    for (i, t) in thrusts.iter().enumerate() {
        if *t == 0.0 {
            continue;
        }
        w += unit_wrench(geom, i, &geom.thrust_direction(i, cmd.tilt_angles[i])) * *t;
    }
    Wrench::from_vector(&w, Frame::Body)
}

/// Wraps an angle to [−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r < -std::f64::consts::PI { r + two_pi } else { r }
}

/// Result of one allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub command: ActuatorCommand,
    pub group_thrusts: [f64; GROUPS],
    /// Force part was scaled down (or the whole wrench, in the fallback path).
    pub saturated: bool,
    /// Scale applied to the saturated part; 1 when unsaturated.
    pub scale: f64,
}

/// Stateful allocator: caches the pseudo-inverse and remembers the tilts
/// for groups that drop to near-zero thrust.
#[derive(Debug, Clone)]
pub struct Allocator {
    geometry: AllocatorGeometry,
    pinv: SMatrix<f64, 12, 6>,
    tilts: [f64; GROUPS],
}

fn pair(x: &DecisionVector, i: usize) -> Vector2<f64> {
    Vector2::new(x[2 * i], x[2 * i + 1])
}

/// Largest `s ≥ 0` with `‖a + s b‖ ≤ limit`, given `‖a‖ ≤ limit`.
fn max_scale(a: &Vector2<f64>, b: &Vector2<f64>, limit: f64) -> f64 {
    let bb = b.norm_squared();
    if bb == 0.0 {
        return f64::INFINITY;
    }
    let ab = a.dot(b);
    let c = a.norm_squared() - limit * limit;
    let disc = (ab * ab - bb * c).max(0.0);
    ((-ab + disc.sqrt()) / bb).max(0.0)
}

impl Allocator {
    pub fn new(geometry: AllocatorGeometry) -> Result<Self> {
        geometry.validate()?;
        let pinv = pseudo_inverse(&allocation_matrix(&geometry))?;
        Ok(Self { geometry, pinv, tilts: [0.0; GROUPS] })
    }

    pub fn geometry(&self) -> &AllocatorGeometry {
        &self.geometry
    }

    pub fn tilts(&self) -> &[f64; GROUPS] {
        &self.tilts
    }

    /// Minimum-norm decision vector for `w`.
    pub fn solve(&self, w: &Wrench) -> DecisionVector {
        self.pinv * w.to_vector()
    }

    /// Allocates `w`, scaling only its force part when a group would exceed
    /// the thrust limit.
    pub fn allocate(&mut self, w: &Wrench) -> Result<Allocation> {
        let limit = self.geometry.max_group_thrust;
        let x_m = self.pinv * Vector6::new(0.0, 0.0, 0.0, w.torque.x, w.torque.y, w.torque.z);
        let x_f = self.pinv * Vector6::new(w.force.x, w.force.y, w.force.z, 0.0, 0.0, 0.0);
        let mut scale: f64 = 1.0;
        for i in 0..GROUPS {
            let a = pair(&x_m, i);
            let t = a.norm();
            if t > limit {
                return Err(Error::Infeasible { group: i, thrust: t, limit });
            }
            scale = scale.min(max_scale(&a, &pair(&x_f, i), limit));
        }
        let x = x_m + x_f * scale;
        Ok(self.finish(&x, scale < 1.0, scale))
    }

    /// Like [`Allocator::allocate`], but scales the whole wrench when the
    /// torque alone is out of reach instead of failing.
    pub fn allocate_saturating(&mut self, w: &Wrench) -> Allocation {
        match self.allocate(w) {
            Ok(a) => a,
            Err(_) => {
                let x = self.solve(w);
                let limit = self.geometry.max_group_thrust;
                let worst = (0..GROUPS).map(|i| pair(&x, i).norm()).fold(0.0, f64::max);
                let scale = limit / worst;
                self.finish(&(x * scale), true, scale)
            }
        }
    }

    fn finish(&mut self, x: &DecisionVector, saturated: bool, scale: f64) -> Allocation {
        let limit = self.geometry.max_group_thrust;
        let mut cmd = ActuatorCommand::default();
        let mut thrusts = [0.0; GROUPS];
        let mut clamped = false;
        for i in 0..GROUPS {
            let p = pair(x, i);
            let mut t = p.norm();
            if t > limit {
                t = limit;
                clamped = true;
            }
            if t >= TILT_HOLD_THRUST {
                self.tilts[i] = p.y.atan2(p.x);
            }
            thrusts[i] = t;
            cmd.tilt_angles[i] = self.tilts[i];
            let speed = self.geometry.rotor_speed_for(t);
            for k in 0..self.geometry.rotors_per_group {
                cmd.rotor_speeds[i * self.geometry.rotors_per_group + k] = speed;
            }
        }
        Allocation { command: cmd, group_thrusts: thrusts, saturated: saturated || clamped, scale }
    }
}

/// One-shot allocation without tilt memory.
pub fn allocate(w: &Wrench, geom: &AllocatorGeometry) -> Result<Allocation> {
    Allocator::new(geom.clone())?.allocate(w)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    fn hover() -> Wrench {
        Wrench::new(Vector3::new(0.0, 0.0, 4.75 * 9.81), Vector3::zeros(), Frame::Body)
    }

    #[test]
    fn first_axial_column_by_hand() {
        let g = AllocatorGeometry::default();
        let a = allocation_matrix(&g);
        // r_0 = (L,0,0): r × ẑ = (0,−L,0); drag +κ ẑ.
        let expected = Vector6::new(0.0, 0.0, 1.0, 0.0, -0.3, 0.016);
        assert_relative_eq!(a.column(0).into_owned(), expected, epsilon = 1e-15);
        // Lateral column of group 0: tangent (0,−1,0), r × t = (0,0,−L), drag along t.
        let lat = Vector6::new(0.0, -1.0, 0.0, 0.0, -0.016, -0.3);
        assert_relative_eq!(a.column(1).into_owned(), lat, epsilon = 1e-15);
    }

    #[test]
    fn axial_columns_sum_to_pure_lift() {
        let a = allocation_matrix(&AllocatorGeometry::default());
        let sum: Vector6<f64> = (0..GROUPS).map(|i| a.column(2 * i).into_owned()).sum();
        assert_relative_eq!(sum, Vector6::new(0.0, 0.0, 6.0, 0.0, 0.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn full_rank_and_pinv_matches_svd() {
        let a = allocation_matrix(&AllocatorGeometry::default());
        let svd = a.svd(true, true);
        assert_eq!(svd.rank(1e-9), 6);
        let via_svd = svd.pseudo_inverse(1e-12).unwrap();
        let ours = pseudo_inverse(&a).unwrap();
        assert!((via_svd - ours).abs().max() < 1e-12);
    }

    #[test]
    fn hover_allocation() {
        let g = AllocatorGeometry::default();
        let out = allocate(&hover(), &g).unwrap();
        assert!(!out.saturated);
        for i in 0..GROUPS {
            assert_relative_eq!(out.group_thrusts[i], 46.5975 / 6.0, epsilon = 1e-12);
            assert_relative_eq!(out.command.tilt_angles[i], 0.0, epsilon = 1e-12);
        }
        let back = forward_wrench(&out.command, &g);
        assert!((back.to_vector() - hover().to_vector()).abs().max() < 1e-9);
    }

    #[test]
    fn zero_wrench_keeps_previous_tilts() {
        let mut alloc = Allocator::new(AllocatorGeometry::default()).unwrap();
        let lateral = Wrench::new(Vector3::new(5.0, 0.0, 40.0), Vector3::zeros(), Frame::Body);
        let first = alloc.allocate(&lateral).unwrap();
        let zero = alloc.allocate(&Wrench::zero(Frame::Body)).unwrap();
        assert_eq!(zero.group_thrusts, [0.0; GROUPS]);
        assert_eq!(zero.command.tilt_angles, first.command.tilt_angles);
    }

    #[test]
    fn lateral_force_round_trip() {
        let g = AllocatorGeometry::default();
        let w = Wrench::new(Vector3::new(6.0, 0.0, 0.0), Vector3::zeros(), Frame::Body);
        let out = allocate(&w, &g).unwrap();
        assert!((forward_wrench(&out.command, &g).to_vector() - w.to_vector()).abs().max() < 1e-9);
    }

    #[test]
    fn single_tilted_group() {
        let g = AllocatorGeometry::default();
        let mut cmd = ActuatorCommand::default();
        let speed = g.rotor_speed_for(10.0);
        cmd.rotor_speeds[0] = speed;
        cmd.rotor_speeds[1] = speed;
        cmd.tilt_angles[0] = FRAC_PI_2;
        let w = forward_wrench(&cmd, &g);
        // Thrust along t_0 = (0,−1,0): r × F = (0.3,0,0) × (0,−10,0) = (0,0,−3);
        // drag adds +0.016·10 along t_0.
        assert_relative_eq!(w.force, Vector3::new(0.0, -10.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(w.torque, Vector3::new(0.0, -0.16, -3.0), epsilon = 1e-12);
    }

    #[test]
    fn zero_speeds_give_zero_wrench() {
        let w = forward_wrench(&ActuatorCommand::default(), &AllocatorGeometry::default());
        assert_eq!(w.to_vector(), Vector6::zeros());
    }

    #[test]
    fn force_saturation_preserves_torque() {
        let g = AllocatorGeometry::default();
        let w = Wrench::new(Vector3::new(0.0, 0.0, 200.0), Vector3::new(0.0, 0.0, 1.0), Frame::Body);
        let out = allocate(&w, &g).unwrap();
        assert!(out.saturated);
        assert!(out.group_thrusts.iter().all(|t| *t <= 20.0 + 1e-12));
        let back = forward_wrench(&out.command, &g);
        assert_relative_eq!(back.torque, w.torque, epsilon = 1e-9);
        assert_relative_eq!(back.force.z, 200.0 * out.scale, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_torque_is_reported_then_saturated() {
        let g = AllocatorGeometry::default();
        let w = Wrench::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 100.0), Frame::Body);
        assert!(matches!(allocate(&w, &g), Err(Error::Infeasible { .. })));
        let mut alloc = Allocator::new(g).unwrap();
        let out = alloc.allocate_saturating(&w);
        assert!(out.saturated);
        assert!(out.group_thrusts.iter().all(|t| *t <= 20.0 + 1e-12));
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI.copysign(-1.0), epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.5), 0.5);
        assert_relative_eq!(wrap_angle(-7.0), -7.0 + 2.0 * std::f64::consts::PI, epsilon = 1e-12);
    }
}
