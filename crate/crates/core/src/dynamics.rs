//! Rigid-body model `M v̇ + C v + g = τ_a + τ_e` realized in the body frame,
//! penalty contact at the tool tip, scheduled pulls, and a fixed-step
//! Runge–Kutta integrator on SE(3).

use nalgebra::{Matrix6, Vector3, Vector6};

use crate::allocation::{forward_wrench, ActuatorCommand, AllocatorGeometry};
use crate::geometry::{wrench_at_origin, Frame, Pose, Rotation, Twist, Wrench};
use crate::scene::{Scene, FRICTION_VELOCITY_EPSILON};
use crate::{Error, Result};

/// Standard gravity [m/s²]. World z points up.
pub const GRAVITY: f64 = 9.81;

/// Largest accepted physics step [s].
pub const MAX_TIME_STEP: f64 = 0.01;

/// Mass, inertia and geometry of the vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// [kg]
    pub mass: f64,
    /// Principal moments about the body axes [kg·m²].
    pub inertia: Vector3<f64>,
    /// Declination of the tool axis from −z_b toward +x_b [rad].
    pub arm_pitch: f64,
    /// Distance from the body origin to the tool tip along the tool axis [m].
    pub tool_length: f64,
    /// Rotor-group distance from the body origin [m].
    pub group_distance: f64,
    /// [N]
    pub max_group_thrust: f64,
    pub group_count: usize,
    pub rotors_per_group: usize,
    /// Center of mass relative to the body origin [m]; only the plant sees it.
    pub com_offset: Vector3<f64>,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 4.75,
            inertia: Vector3::new(0.12, 0.12, 0.22),
            arm_pitch: 90f64.to_radians(),
            tool_length: 0.375,
            group_distance: 0.3,
            max_group_thrust: 20.0,
            group_count: 6,
            rotors_per_group: 2,
            com_offset: Vector3::zeros(),
        }
    }
}

impl VehicleParams {
    pub fn with_arm_pitch_deg(mut self, deg: f64) -> Self {
        self.arm_pitch = deg.to_radians();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", self.mass)));
        }
        if self.inertia.iter().any(|j| !(*j > 0.0)) {
            return Err(Error::InvalidParameter("inertia entries must be positive".into()));
        }
        if !(self.group_distance > 0.0) || !(self.max_group_thrust > 0.0) || !(self.tool_length >= 0.0) {
            return Err(Error::InvalidParameter("geometry lengths and thrust limit must be positive".into()));
        }
        if self.group_count != 6 || self.rotors_per_group == 0 {
            return Err(Error::InvalidParameter("the allocator models six rotor groups".into()));
        }
        Ok(())
    }

    /// Model the controller and estimator use: the true center-of-mass
    /// offset is unknown to them.
    pub fn nominal(&self) -> Self {
        Self { com_offset: Vector3::zeros(), ..self.clone() }
    }

    /// Tool axes as columns in body coordinates (`R_bt`). The tool z-axis
    /// lies in the x_b–z_b plane, declined by `arm_pitch` from −z_b; y_t = y_b.
    pub fn tool_rotation(&self) -> Rotation {
        Rotation::about_y(std::f64::consts::PI - self.arm_pitch)
    }

    /// Tool-tip position in the body frame.
    pub fn tool_offset(&self) -> Vector3<f64> {
        self.tool_rotation().rotate(&Vector3::z()) * self.tool_length
    }

    pub fn mass_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&self.mass_diagonal())
    }

    pub fn mass_diagonal(&self) -> Vector6<f64> {
        Vector6::new(self.mass, self.mass, self.mass, self.inertia.x, self.inertia.y, self.inertia.z)
    }
}

/// Pose, body twist and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub pose: Pose,
    /// Body-frame linear and angular velocity.
    pub twist: Twist,
    pub time: f64,
}

impl SimState {
    pub fn at_rest(pose: Pose) -> Self {
        Self { pose, twist: Twist::zero(Frame::Body), time: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.position.iter().all(|x| x.is_finite())
            && self.pose.orientation.matrix().iter().all(|x| x.is_finite())
            && self.twist.is_finite()
            && self.time.is_finite()
    }

    /// Tool-tip position in the world frame.
    pub fn tool_tip(&self, params: &VehicleParams) -> Vector3<f64> {
        self.pose.transform_point(&params.tool_offset())
    }

    /// World-frame velocity of a body-fixed point.
    pub fn point_velocity(&self, body_point: &Vector3<f64>) -> Vector3<f64> {
        let v = self.twist.linear + self.twist.angular.cross(body_point);
        self.pose.orientation.rotate(&v)
    }

    /// Translational plus rotational kinetic energy and gravitational
    /// potential energy (reference z = 0).
    pub fn mechanical_energy(&self, params: &VehicleParams) -> f64 {
        let v = self.twist.linear;
        let w = self.twist.angular;
        0.5 * params.mass * v.norm_squared()
            + 0.5 * w.dot(&params.inertia.component_mul(&w))
            + params.mass * GRAVITY * self.pose.position.z
    }
}

/// The `g` term of the model: the wrench the actuation must supply to
/// balance gravity, in the body frame.
pub fn gravity_term(r: &Rotation, params: &VehicleParams) -> Wrench {
    let force = r.transpose().rotate(&Vector3::new(0.0, 0.0, params.mass * GRAVITY));
    Wrench::new(force, params.com_offset.cross(&force), Frame::Body)
}

/// `C v` in body-frame Newton–Euler form: `(m ω × v, ω × Jω)`.
pub fn coriolis_term(v: &Twist, params: &VehicleParams) -> Wrench {
    let w = v.angular;
    Wrench::new(
        w.cross(&v.linear) * params.mass,
        w.cross(&params.inertia.component_mul(&w)),
        Frame::Body,
    )
}

/// `v̇ = M⁻¹ (τ_a + τ_e − C v − g)`.
pub fn forward_dynamics(state: &SimState, actuation: &Wrench, external: &Wrench, params: &VehicleParams) -> Vector6<f64> {
    let rhs = actuation.to_vector() + external.to_vector()
        - coriolis_term(&state.twist, params).to_vector()
        - gravity_term(&state.pose.orientation, params).to_vector();
    rhs.component_div(&params.mass_diagonal())
}

/// Contact force on the tool tip from one primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactForce {
    pub primitive: usize,
    pub penetration: f64,
    /// Normal force magnitude (never negative).
    pub normal_force: f64,
    /// Total force on the vehicle, world frame.
    pub force_world: Vector3<f64>,
}

/// Per-primitive penalty contact at the tool tip.
pub fn contact_forces(state: &SimState, params: &VehicleParams, scene: &Scene) -> Vec<ContactForce> {
    let tip = state.tool_tip(params);
    let mut out = Vec::new();
    let mut tip_velocity = None;
    for (i, prim) in scene.primitives.iter().enumerate() {
        let pen = prim.penetration(&tip);
        if pen.depth <= 0.0 {
            continue;
        }
        let v = *tip_velocity.get_or_insert_with(|| state.point_velocity(&params.tool_offset()));
        let depth_rate = -v.dot(&pen.normal);
        let normal_force = (scene.contact_stiffness * pen.depth + scene.contact_damping * depth_rate).max(0.0);
        let v_t = v - pen.normal * v.dot(&pen.normal);
        let friction = -v_t * (scene.friction * normal_force / v_t.norm().max(FRICTION_VELOCITY_EPSILON));
        out.push(ContactForce {
            primitive: i,
            penetration: pen.depth,
            normal_force,
            force_world: pen.normal * normal_force + friction,
        });
    }
    out
}

/// Total contact wrench about the body origin, body frame.
pub fn contact_wrench(state: &SimState, params: &VehicleParams, scene: &Scene) -> Wrench {
    let force_world: Vector3<f64> = contact_forces(state, params, scene).iter().map(|c| c.force_world).sum();
    let force = state.pose.orientation.transpose().rotate(&force_world);
    wrench_at_origin(&Wrench::new(force, Vector3::zeros(), Frame::Body), &params.tool_offset())
}

/// Where a pull is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PullPoint {
    ToolTip,
    BodyOrigin,
}

/// Trapezoidal force pulse: linear ramp up, hold, linear ramp down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pull {
    pub start: f64,
    pub ramp: f64,
    pub hold: f64,
    /// Peak force [N].
    pub magnitude: f64,
    /// Unit direction in the world frame.
    pub direction: Vector3<f64>,
    pub point: PullPoint,
}

impl Pull {
    /// Force magnitude at time `t`.
    pub fn magnitude_at(&self, t: f64) -> f64 {
        let s = t - self.start;
        if s < 0.0 {
            return 0.0;
        }
        let up = if self.ramp > 0.0 { (s / self.ramp).min(1.0) } else { 1.0 };
        let s_down = s - self.ramp - self.hold;
        let down = if s_down <= 0.0 {
            1.0
        } else if self.ramp > 0.0 {
            (1.0 - s_down / self.ramp).max(0.0)
        } else {
            0.0
        };
        self.magnitude * up.min(down)
    }

    pub fn end(&self) -> f64 {
        self.start + 2.0 * self.ramp + self.hold
    }
}

/// Schedule of externally applied pulls.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisturbanceProfile {
    pub pulls: Vec<Pull>,
}

impl DisturbanceProfile {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pulls {
            if (p.direction.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter("pull direction must be unit length".into()));
            }
            if p.ramp < 0.0 || p.hold < 0.0 || !p.magnitude.is_finite() {
                return Err(Error::InvalidParameter("pull timing must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Body-frame wrench about the origin at time `t`.
    pub fn wrench(&self, state: &SimState, params: &VehicleParams, t: f64) -> Wrench {
        let rt = state.pose.orientation.transpose();
        let mut total = Wrench::zero(Frame::Body);
        for pull in &self.pulls {
            let f = pull.magnitude_at(t);
            if f == 0.0 {
                continue;
            }
            let force = rt.rotate(&(pull.direction * f));
            let point = match pull.point {
                PullPoint::ToolTip => params.tool_offset(),
                PullPoint::BodyOrigin => Vector3::zeros(),
            };
            total = total + wrench_at_origin(&Wrench::new(force, Vector3::zeros(), Frame::Body), &point);
        }
        total
    }
}

/// `dexp⁻¹_θ(ω)`: rate of the local rotation vector θ that produces body rate ω.
fn dexp_inv(theta: &Vector3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    let t2 = theta.norm_squared();
    let c = if t2 < 1e-8 {
        1.0 / 12.0 + t2 / 720.0
    } else {
        let t = t2.sqrt();
        (1.0 - 0.5 * t / (0.5 * t).tan()) / t2
    };
    let tw = theta.cross(w);
    w - tw * 0.5 + theta.cross(&tw) * c
}

/// One classical RK4 step on `(p, R, v, ω)` with the rotation advanced by
/// Munthe-Kaas composition `R exp(θ)`. `accel` returns body accelerations
/// for an intermediate state at the given time.
pub fn integrate_rk4<F>(state: &SimState, dt: f64, mut accel: F) -> SimState
where
    F: FnMut(&SimState) -> Vector6<f64>,
{
    let p0 = state.pose.position;
    let r0 = state.pose.orientation;
    let x0 = state.twist.to_vector();

    let stage = |theta: &Vector3<f64>, dp: &Vector3<f64>, dx: &Vector6<f64>, t: f64| SimState {
        pose: Pose::new(p0 + dp, r0 * Rotation::exp(theta)),
        twist: Twist::from_vector(&(x0 + dx), Frame::Body),
        time: t,
    };
    // Derivatives of (θ, p, x) at a stage.
    let mut deriv = |s: &SimState, theta: &Vector3<f64>| {
        let a = accel(s);
        let pdot = s.pose.orientation.rotate(&s.twist.linear);
        let thetadot = dexp_inv(theta, &s.twist.angular);
        (thetadot, pdot, a)
    };

    let t = state.time;
    let zero3 = Vector3::zeros();
    let s1 = stage(&zero3, &zero3, &Vector6::zeros(), t);
    let (k1t, k1p, k1x) = deriv(&s1, &zero3);

    let th2 = k1t * (0.5 * dt);
    let s2 = stage(&th2, &(k1p * (0.5 * dt)), &(k1x * (0.5 * dt)), t + 0.5 * dt);
    let (k2t, k2p, k2x) = deriv(&s2, &th2);

    let th3 = k2t * (0.5 * dt);
    let s3 = stage(&th3, &(k2p * (0.5 * dt)), &(k2x * (0.5 * dt)), t + 0.5 * dt);
    let (k3t, k3p, k3x) = deriv(&s3, &th3);

    let th4 = k3t * dt;
    let s4 = stage(&th4, &(k3p * dt), &(k3x * dt), t + dt);
    let (k4t, k4p, k4x) = deriv(&s4, &th4);

    let w = dt / 6.0;
    let theta = (k1t + k2t * 2.0 + k3t * 2.0 + k4t) * w;
    let dp = (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * w;
    let dx = (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * w;
    SimState {
        pose: Pose::new(p0 + dp, (r0 * Rotation::exp(&theta)).renormalized()),
        twist: Twist::from_vector(&(x0 + dx), Frame::Body),
        time: t + dt,
    }
}

/// External wrench on the vehicle at `state`: contact plus scheduled pulls.
pub fn external_wrench(state: &SimState, params: &VehicleParams, scene: &Scene, disturbance: &DisturbanceProfile) -> Wrench {
    contact_wrench(state, params, scene) + disturbance.wrench(state, params, state.time)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= MAX_TIME_STEP {
        Ok(())
    } else {
        Err(Error::InvalidTimeStep { dt, max: MAX_TIME_STEP })
    }
}

/// Advances the state by `dt` with ideal actuators holding `command`.
///
/// Deterministic: identical inputs give bit-identical outputs.
pub fn step(
    state: &SimState,
    command: &ActuatorCommand,
    geometry: &AllocatorGeometry,
    params: &VehicleParams,
    scene: &Scene,
    disturbance: &DisturbanceProfile,
    dt: f64,
) -> Result<SimState> {
    check_dt(dt)?;
    let actuation = forward_wrench(command, geometry);
    step_with_wrench(state, &actuation, params, scene, disturbance, dt)
}

/// Advances the state by `dt` under a constant actuation wrench.
pub fn step_with_wrench(
    state: &SimState,
    actuation: &Wrench,
    params: &VehicleParams,
    scene: &Scene,
    disturbance: &DisturbanceProfile,
    dt: f64,
) -> Result<SimState> {
    check_dt(dt)?;
    let next = integrate_rk4(state, dt, |s| {
        let ext = external_wrench(s, params, scene, disturbance);
        forward_dynamics(s, actuation, &ext, params)
    });
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFiniteState { time: next.time })
    }
}

/// Rotor and tilt-servo response.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ActuatorDynamics {
    /// Commands take effect instantly.
    #[default]
    Ideal,
    /// First-order lag toward the command with the given time constants [s].
    FirstOrderLag { rotor_time_constant: f64, servo_time_constant: f64 },
}

impl ActuatorDynamics {
    pub fn default_lag() -> Self {
        ActuatorDynamics::FirstOrderLag { rotor_time_constant: 0.03, servo_time_constant: 0.06 }
    }
}

/// The simulated vehicle: parameters, environment, and actuator state.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: VehicleParams,
    pub geometry: AllocatorGeometry,
    pub scene: Scene,
    pub disturbance: DisturbanceProfile,
    pub actuators: ActuatorDynamics,
    actual: Option<ActuatorCommand>,
}

impl Plant {
    pub fn new(params: VehicleParams, geometry: AllocatorGeometry, scene: Scene, disturbance: DisturbanceProfile) -> Self {
        Self { params, geometry, scene, disturbance, actuators: ActuatorDynamics::Ideal, actual: None }
    }

    pub fn with_actuator_dynamics(mut self, dynamics: ActuatorDynamics) -> Self {
        self.actuators = dynamics;
        self
    }

    /// Actuator state currently producing thrust.
    pub fn actual_command(&self) -> Option<&ActuatorCommand> {
        self.actual.as_ref()
    }

    fn advance_actuators(&mut self, command: &ActuatorCommand, dt: f64) -> ActuatorCommand {
        let next = match (self.actuators, self.actual) {
            (ActuatorDynamics::Ideal, _) | (_, None) => *command,
            (ActuatorDynamics::FirstOrderLag { rotor_time_constant, servo_time_constant }, Some(prev)) => {
                let kr = 1.0 - (-dt / rotor_time_constant).exp();
                let ks = 1.0 - (-dt / servo_time_constant).exp();
                let mut out = prev;
                for (o, c) in out.rotor_speeds.iter_mut().zip(&command.rotor_speeds) {
                    *o += (c - *o) * kr;
                }
                for (o, c) in out.tilt_angles.iter_mut().zip(&command.tilt_angles) {
                    let diff = crate::allocation::wrap_angle(c - *o);
                    *o = crate::allocation::wrap_angle(*o + diff * ks);
                }
                out
            }
        };
        self.actual = Some(next);
        next
    }

    /// Actuation wrench the actuators produce after this step's update.
    pub fn step(&mut self, state: &SimState, command: &ActuatorCommand, dt: f64) -> Result<SimState> {
        check_dt(dt)?;
        let actual = self.advance_actuators(command, dt);
        let actuation = forward_wrench(&actual, &self.geometry);
        step_with_wrench(state, &actuation, &self.params, &self.scene, &self.disturbance, dt)
    }

    /// Contact plus disturbance wrench at `state`.
    pub fn external_wrench(&self, state: &SimState) -> Wrench {
        external_wrench(state, &self.params, &self.scene, &self.disturbance)
    }
}
