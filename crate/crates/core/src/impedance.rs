//! Selective impedance control.
//!
//! The target closed loop is `M_v v̇ + D_v ṽ + K_v x̃ = τ_e` with
//! `M_v = M·diag(m*)`. Gains are written per axis in a chosen frame (usually
//! the tool frame) and conjugated into the body frame before use.

use nalgebra::{Matrix6, Vector3, Vector6};

use crate::dynamics::{coriolis_term, gravity_term, SimState, VehicleParams};
use crate::geometry::{conjugate_gain, stack, Frame, Pose, Rotation, Twist, Wrench};
use crate::{Error, Result};

/// Frame the per-axis gains are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainFrame {
    Tool,
    Body,
}

/// Apparent-inertia multipliers, damping and stiffness.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceGains {
    /// m*, dimensionless multipliers of the vehicle inertia.
    pub inertia: Vector6<f64>,
    /// D_v [N·s/m | N·m·s/rad].
    pub damping: Vector6<f64>,
    /// K_v [N/m | N·m/rad].
    pub stiffness: Vector6<f64>,
    pub frame: GainFrame,
}

/// `M̃_v = diag(m*)`, `D̃_v = D_v / m*`, `K̃_v = K_v / m*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedGains {
    pub inertia: Vector6<f64>,
    pub damping: Vector6<f64>,
    pub stiffness: Vector6<f64>,
}

/// Contact-task stiffness in the tool frame.
pub const CONTACT_STIFFNESS: [f64; 6] = [180.0, 180.0, 18.0, 20.0, 20.0, 20.0];
/// Free-flight normalized stiffness K̃ in the body frame.
pub const FREE_FLIGHT_NORMALIZED_STIFFNESS: [f64; 6] = [100.0, 100.0, 100.0, 20.0, 20.0, 20.0];
/// Damping ratio used to derive D from K.
pub const DAMPING_RATIO: f64 = 0.9;

/// How a preset's stiffness and damping are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainSchedule {
    /// K_v, D_v fixed in the tool frame; m* only shapes the transient.
    ContactTool,
    /// K̃, D̃ fixed in the body frame; K_v = m*·K̃ scales with m*.
    FreeFlightBody,
}

/// A named row of the experiment gain table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub arm_pitch_deg: f64,
    pub inertia: [f64; 6],
    pub schedule: GainSchedule,
}

pub const PRESETS: [Preset; 11] = [
    Preset { name: "unit", arm_pitch_deg: 90.0, inertia: [1.0; 6], schedule: GainSchedule::FreeFlightBody },
    Preset { name: "rope-pull-1", arm_pitch_deg: 90.0, inertia: [0.25, 0.25, 1.0, 1.0, 1.0, 1.0], schedule: GainSchedule::FreeFlightBody },
    Preset { name: "rope-pull-2", arm_pitch_deg: 90.0, inertia: [0.1, 0.1, 1.0, 1.0, 1.0, 1.0], schedule: GainSchedule::FreeFlightBody },
    Preset { name: "rope-pull-3", arm_pitch_deg: 90.0, inertia: [5.0, 5.0, 1.0, 1.0, 1.0, 1.0], schedule: GainSchedule::FreeFlightBody },
    Preset { name: "rope-pull-4", arm_pitch_deg: 90.0, inertia: [5.0, 5.0, 5.0, 5.0, 5.0, 0.25], schedule: GainSchedule::FreeFlightBody },
    Preset { name: "rope-pull-5", arm_pitch_deg: 90.0, inertia: [5.0; 6], schedule: GainSchedule::FreeFlightBody },
    Preset { name: "push-and-slide", arm_pitch_deg: 90.0, inertia: [5.0, 5.0, 0.25, 5.0, 5.0, 5.0], schedule: GainSchedule::ContactTool },
    Preset { name: "tof-servoing", arm_pitch_deg: 30.0, inertia: [5.0, 5.0, 0.5, 5.0, 5.0, 5.0], schedule: GainSchedule::ContactTool },
    Preset { name: "contact-ndt", arm_pitch_deg: 90.0, inertia: [5.0, 5.0, 0.25, 5.0, 5.0, 5.0], schedule: GainSchedule::ContactTool },
    Preset { name: "force-eval-1", arm_pitch_deg: 90.0, inertia: [5.0, 5.0, 0.25, 5.0, 5.0, 5.0], schedule: GainSchedule::ContactTool },
    Preset { name: "force-eval-2", arm_pitch_deg: 90.0, inertia: [5.0, 5.0, 2.0, 5.0, 5.0, 5.0], schedule: GainSchedule::ContactTool },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Diagonal of the vehicle mass matrix seen in the tool frame.
pub fn tool_frame_mass_diagonal(params: &VehicleParams) -> Vector6<f64> {
    let r = params.tool_rotation();
    let j = r.matrix().transpose() * nalgebra::Matrix3::from_diagonal(&params.inertia) * r.matrix();
    Vector6::new(params.mass, params.mass, params.mass, j[(0, 0)], j[(1, 1)], j[(2, 2)])
}

fn damping_for(stiffness: &Vector6<f64>, mass: &Vector6<f64>) -> Vector6<f64> {
    stiffness.zip_map(mass, |k, m| 2.0 * DAMPING_RATIO * (k * m).sqrt())
}

impl Preset {
    /// Full gains for `params` (whose arm pitch should match the preset).
    pub fn gains(&self, params: &VehicleParams) -> ImpedanceGains {
        let inertia = Vector6::from(self.inertia);
        match self.schedule {
            GainSchedule::ContactTool => {
                let k = Vector6::from(CONTACT_STIFFNESS);
                ImpedanceGains {
                    inertia,
                    damping: damping_for(&k, &tool_frame_mass_diagonal(params)),
                    stiffness: k,
                    frame: GainFrame::Tool,
                }
            }
            GainSchedule::FreeFlightBody => {
                let k_tilde = Vector6::from(FREE_FLIGHT_NORMALIZED_STIFFNESS);
                let d_tilde = damping_for(&k_tilde, &params.mass_diagonal());
                ImpedanceGains::from_normalized(inertia, d_tilde, k_tilde, GainFrame::Body)
            }
        }
    }
}

impl ImpedanceGains {
    /// Builds gains from normalized damping and stiffness: `D_v = m*·D̃`, `K_v = m*·K̃`.
    pub fn from_normalized(inertia: Vector6<f64>, damping: Vector6<f64>, stiffness: Vector6<f64>, frame: GainFrame) -> Self {
        Self {
            damping: damping.component_mul(&inertia),
            stiffness: stiffness.component_mul(&inertia),
            inertia,
            frame,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("inertia", &self.inertia), ("damping", &self.damping), ("stiffness", &self.stiffness)] {
            if let Some((axis, value)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
                return Err(Error::NonPositiveGain { name, axis, value: *value });
            }
        }
        Ok(())
    }

    /// Rotation taking gain-frame vectors to body vectors.
    pub fn expression_rotation(&self, r_bt: &Rotation) -> Rotation {
        match self.frame {
            GainFrame::Tool => *r_bt,
            GainFrame::Body => Rotation::identity(),
        }
    }
}

pub fn normalized_gains(gains: &ImpedanceGains) -> Result<NormalizedGains> {
    gains.validate()?;
    Ok(NormalizedGains {
        inertia: gains.inertia,
        damping: gains.damping.component_div(&gains.inertia),
        stiffness: gains.stiffness.component_div(&gains.inertia),
    })
}

/// Desired pose, world-frame velocity `(ṗ_d, ω_d)` and acceleration `(p̈_d, ω̇_d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub pose: Pose,
    pub velocity: Twist,
    pub acceleration: Vector6<f64>,
}

impl Setpoint {
    pub fn hold(pose: Pose) -> Self {
        Self { pose, velocity: Twist::zero(Frame::World), acceleration: Vector6::zeros() }
    }
}

/// `x̃ = (Rᵀ(p − p_d), log(R_dᵀR))`, body frame.
pub fn pose_error(pose: &Pose, desired: &Pose) -> Vector6<f64> {
    let rt = pose.orientation.transpose();
    let pos = rt.rotate(&(pose.position - desired.position));
    let rot = (desired.orientation.transpose() * pose.orientation).log_any();
    stack(&pos, &rot)
}

/// `ṽ = v − (Rᵀṗ_d, Rᵀω_d)`, body frame.
pub fn velocity_error(state: &SimState, sp: &Setpoint) -> Vector6<f64> {
    state.twist.to_vector() - desired_body_twist(&state.pose.orientation, sp)
}

fn desired_body_twist(r: &Rotation, sp: &Setpoint) -> Vector6<f64> {
    let rt = r.transpose();
    stack(&rt.rotate(&sp.velocity.linear), &rt.rotate(&sp.velocity.angular))
}

/// Rate of the desired body twist along the current motion.
fn desired_body_acceleration(state: &SimState, sp: &Setpoint) -> Vector6<f64> {
    let rt = state.pose.orientation.transpose();
    let w = state.twist.angular;
    let vd = desired_body_twist(&state.pose.orientation, sp);
    let lin = rt.rotate(&sp.acceleration.fixed_rows::<3>(0).into_owned()) - w.cross(&vd.fixed_rows::<3>(0).into_owned());
    let ang = rt.rotate(&sp.acceleration.fixed_rows::<3>(3).into_owned()) - w.cross(&vd.fixed_rows::<3>(3).into_owned());
    stack(&lin, &ang)
}

/// Body-frame gain matrices, conjugated once.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceController {
    params: VehicleParams,
    feedthrough: Matrix6<f64>,
    damping: Matrix6<f64>,
    stiffness: Matrix6<f64>,
    inertia_body: Matrix6<f64>,
    damping_v: Matrix6<f64>,
    stiffness_v: Matrix6<f64>,
}

impl ImpedanceController {
    /// `params` is the model the controller believes in.
    pub fn new(gains: &ImpedanceGains, r_bt: &Rotation, params: VehicleParams) -> Result<Self> {
        let n = normalized_gains(gains)?;
        let r = gains.expression_rotation(r_bt);
        let diag = |v: &Vector6<f64>| conjugate_gain(&Matrix6::from_diagonal(v), &r);
        Ok(Self {
            params,
            feedthrough: diag(&n.inertia.map(|m| 1.0 / m)),
            damping: diag(&n.damping),
            stiffness: diag(&n.stiffness),
            inertia_body: diag(&n.inertia),
            damping_v: diag(&gains.damping),
            stiffness_v: diag(&gains.stiffness),
        })
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    /// `τ_a = (G_M − I)τ̂_e − G_D ṽ − G_K x̃ + C v + g + M a_d`.
    pub fn control_wrench(&self, state: &SimState, sp: &Setpoint, estimate: &Wrench) -> Wrench {
        let x = pose_error(&state.pose, &sp.pose);
        let v = velocity_error(state, sp);
        let a_d = desired_body_acceleration(state, sp);
        let tau = (self.feedthrough - Matrix6::identity()) * estimate.to_vector() - self.damping * v - self.stiffness * x
            + coriolis_term(&state.twist, &self.params).to_vector()
            + gravity_term(&state.pose.orientation, &self.params).to_vector()
            + self.params.mass_matrix() * a_d;
        Wrench::from_vector(&tau, Frame::Body)
    }

    /// `M_v (v̇ − a_d) + D_v ṽ + K_v x̃ − τ_e`, conjugated into the body
    /// frame; zero when the closed loop behaves as designed.
    pub fn closed_loop_residual(&self, state: &SimState, accel: &Vector6<f64>, sp: &Setpoint, external: &Wrench) -> Vector6<f64> {
        let x = pose_error(&state.pose, &sp.pose);
        let v = velocity_error(state, sp);
        let a_d = desired_body_acceleration(state, sp);
        self.inertia_body * self.params.mass_matrix() * (accel - a_d) + self.damping_v * v + self.stiffness_v * x
            - external.to_vector()
    }
}

/// One-shot form of [`ImpedanceController::control_wrench`].
pub fn control_wrench(
    state: &SimState,
    sp: &Setpoint,
    estimate: &Wrench,
    gains: &ImpedanceGains,
    r_bt: &Rotation,
    params: &VehicleParams,
) -> Result<Wrench> {
    Ok(ImpedanceController::new(gains, r_bt, params.clone())?.control_wrench(state, sp, estimate))
}

/// Tool-frame apparent inertia, stiffness and damping of one axis; handy for
/// analytic step responses.
pub fn axis_parameters(gains: &ImpedanceGains, params: &VehicleParams, axis: usize) -> (f64, f64, f64) {
    let m = match gains.frame {
        GainFrame::Tool => tool_frame_mass_diagonal(params)[axis],
        GainFrame::Body => params.mass_diagonal()[axis],
    };
    (gains.inertia[axis] * m, gains.damping[axis], gains.stiffness[axis])
}

/// Unit vector of `axis` (0..3 translational) of the gain frame, in body coordinates.
pub fn gain_axis(gains: &ImpedanceGains, r_bt: &Rotation, axis: usize) -> Vector3<f64> {
    let mut e = Vector3::zeros();
    e[axis % 3] = 1.0;
    gains.expression_rotation(r_bt).rotate(&e)
}
