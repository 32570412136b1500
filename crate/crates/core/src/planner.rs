//! Surface-relative set points: approach, press, slide and retreat
//! targets regenerated from the newest surface estimate.

use nalgebra::{Matrix3, Vector3};

use crate::dynamics::VehicleParams;
use crate::geometry::{Pose, Rotation};
use crate::impedance::Setpoint;
use crate::perception::SurfacePatch;
use crate::trajectory::{hold, Kinematics, Segment};
use crate::{Error, Result};

/// Normals closer than this to vertical leave the yaw free [rad].
pub const VERTICAL_BAND: f64 = 1.0 * std::f64::consts::PI / 180.0;

const END_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Tool-tip depth behind the surface while pressing or sliding [m].
    pub penetration_offset: f64,
    /// Tool-tip distance in front of the surface when approaching or retreating [m].
    pub standoff: f64,
    /// Tangential set-point speed [m/s].
    pub slide_speed: f64,
    /// [Hz]
    pub rate: f64,
    /// Cruise limits used to size free-motion segments.
    pub max_speed: f64,
    pub max_angular_speed: f64,
    pub min_duration: f64,
    /// Invalid estimates are tolerated this long before holding [s].
    pub invalid_timeout: f64,
    /// Re-planning thresholds for non-sliding modes.
    pub replan_distance: f64,
    pub replan_angle: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            penetration_offset: 0.10,
            standoff: 0.15,
            slide_speed: 0.17,
            rate: 5.0,
            max_speed: 0.2,
            max_angular_speed: 0.3,
            min_duration: 1.0,
            invalid_timeout: 1.0,
            replan_distance: 0.002,
            replan_angle: 0.5f64.to_radians(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) {
            return Err(Error::InvalidParameter("planner rate must be positive".into()));
        }
        if !(self.penetration_offset >= 0.0) || !(self.standoff >= 0.0) {
            return Err(Error::InvalidParameter("penetration offset and standoff must be ≥ 0".into()));
        }
        if !(self.slide_speed > 0.0 && self.max_speed > 0.0 && self.max_angular_speed > 0.0 && self.min_duration > 0.0) {
            return Err(Error::InvalidParameter("speeds and durations must be positive".into()));
        }
        Ok(())
    }
}

/// What the planner is asked to do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlannerMode {
    /// Face the surface at the standoff distance, opposite the contact
    /// point seen in the first valid estimate after entering the mode.
    Approach,
    /// Push the tool tip behind the surface at the anchor.
    Press,
    /// Move the pressed anchor along a tool-frame direction projected on the surface.
    Slide { direction: Vector3<f64>, distance: f64 },
    /// Like `Slide` but at the standoff distance, out of contact.
    Shift { direction: Vector3<f64>, distance: f64 },
    /// Back off to the standoff distance at the anchor.
    Retreat,
    /// Come to rest where the set point is.
    Hold,
}

impl PlannerMode {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerMode::Approach => "approach",
            PlannerMode::Press => "press",
            PlannerMode::Slide { .. } => "slide",
            PlannerMode::Shift { .. } => "shift",
            PlannerMode::Retreat => "retreat",
            PlannerMode::Hold => "hold",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            PlannerMode::Approach => 0,
            PlannerMode::Press => 1,
            PlannerMode::Slide { .. } => 2,
            PlannerMode::Shift { .. } => 3,
            PlannerMode::Retreat => 4,
            PlannerMode::Hold => 5,
        }
    }

    fn in_contact(&self) -> bool {
        matches!(self, PlannerMode::Press | PlannerMode::Slide { .. })
    }
}

/// Body pose placing the tool tip `depth` behind `patch` (negative: in
/// front of it) with the tool axis along `−n` and the body y-axis level.
pub fn target_pose(current: &Pose, patch: &SurfacePatch, depth: f64, params: &VehicleParams) -> Pose {
    let n = patch.normal.normalize();
    let z_t = -n;
    let tip = patch.point - n * depth;
    let y_now = current.orientation.rotate(&Vector3::y());
    let level = z_t.cross(&Vector3::z());
    let y = if level.norm() > VERTICAL_BAND.sin() {
        let y = level.normalize();
        if y.dot(&y_now) < 0.0 { -y } else { y }
    } else {
        let proj = y_now - z_t * y_now.dot(&z_t);
        proj.try_normalize(1e-9).unwrap_or_else(|| {
            let x_now = current.orientation.rotate(&Vector3::x());
            z_t.cross(&x_now).normalize()
        })
    };
    let x = y.cross(&z_t);
    let r_wt = Rotation::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z_t]));
    let r_wb = r_wt * params.tool_rotation().transpose();
    Pose::new(tip - r_wb.rotate(&params.tool_offset()), r_wb)
}

/// Projects `anchor` onto the patch plane and moves it `step` along the
/// in-plane part of `direction`.
pub fn slide_anchor(anchor: &Vector3<f64>, patch: &SurfacePatch, direction: &Vector3<f64>, step: f64) -> Vector3<f64> {
    let n = patch.normal;
    let on_plane = anchor - n * (anchor - patch.point).dot(&n);
    if step == 0.0 {
        return on_plane;
    }
    match (direction - n * direction.dot(&n)).try_normalize(1e-9) {
        Some(t) => on_plane + t * step,
        None => on_plane,
    }
}

/// Set-point form of [`slide_anchor`]: re-targets `target` after moving the
/// anchor under its tool tip.
pub fn slide_setpoint(target: &Pose, patch: &SurfacePatch, direction: &Vector3<f64>, step: f64, depth: f64, params: &VehicleParams) -> Pose {
    if step == 0.0 {
        return *target;
    }
    let tip = target.transform_point(&params.tool_offset());
    let anchor = tip + patch.normal * depth;
    let moved = slide_anchor(&anchor, patch, direction, step);
    target_pose(target, &SurfacePatch { point: moved, normal: patch.normal }, depth, params)
}

/// What the planner did on a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickOutcome {
    Replanned,
    Kept,
    Holding,
    Waiting,
}

/// Pure-pursuit planner state.
#[derive(Debug, Clone)]
pub struct SurfacePlanner {
    cfg: PlannerConfig,
    params: VehicleParams,
    mode: PlannerMode,
    segment: Option<Segment>,
    rest: Pose,
    anchor: Option<Vector3<f64>>,
    travel: f64,
    last_valid: Option<f64>,
    holding: bool,
}

impl SurfacePlanner {
    pub fn new(cfg: PlannerConfig, params: VehicleParams, start: Pose) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            params,
            mode: PlannerMode::Hold,
            segment: None,
            rest: start,
            anchor: None,
            travel: 0.0,
            last_valid: None,
            holding: false,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn mode(&self) -> PlannerMode {
        self.mode
    }

    /// True once the invalid-estimate timeout forced a stop.
    pub fn is_holding(&self) -> bool {
        self.holding
    }

    /// Distance covered by the current slide or shift [m].
    pub fn travel(&self) -> f64 {
        self.travel
    }

    pub fn anchor(&self) -> Option<Vector3<f64>> {
        self.anchor
    }

    pub fn set_mode(&mut self, mode: PlannerMode, time: f64) {
        self.mode = mode;
        self.travel = 0.0;
        if mode == PlannerMode::Approach {
            self.anchor = None;
        }
        if mode == PlannerMode::Hold {
            self.stop(time);
        }
    }

    /// Set point at `time`.
    pub fn setpoint(&self, time: f64) -> Setpoint {
        match &self.segment {
            Some(seg) if time <= seg.end_time() + END_TOLERANCE => seg.sample(time),
            Some(seg) => hold(&seg.goal()),
            None => hold(&self.rest),
        }
    }

    fn stop(&mut self, time: f64) {
        let sp = self.setpoint(time);
        let v = sp.velocity.linear;
        let goal = Pose::new(sp.pose.position + v * 0.5, sp.pose.orientation);
        let start = Kinematics { position: sp.pose.position, velocity: v, acceleration: sp.acceleration.fixed_rows::<3>(0).into_owned() };
        self.segment = Some(Segment::from_state(&start, &sp.pose.orientation, &goal, Vector3::zeros(), time, 1.0));
        self.rest = goal;
    }

    /// Runs one planning step. `patch` is the newest valid surface estimate
    /// in the world frame, if any.
    pub fn tick(&mut self, time: f64, patch: Option<&SurfacePatch>) -> TickOutcome {
        if self.mode == PlannerMode::Hold {
            return TickOutcome::Holding;
        }
        let Some(patch) = patch else {
            let since = self.last_valid.map_or(f64::INFINITY, |t| time - t);
            if since > self.cfg.invalid_timeout && !self.holding {
                self.holding = true;
                self.stop(time);
            }
            return if self.holding { TickOutcome::Holding } else { TickOutcome::Waiting };
        };
        self.last_valid = Some(time);
        self.holding = false;

        let current = self.setpoint(time);
        let anchor = match self.anchor {
            Some(a) => slide_anchor(&a, patch, &Vector3::zeros(), 0.0),
            None => patch.point,
        };
        let depth = if self.mode.in_contact() { self.cfg.penetration_offset } else { -self.cfg.standoff };

        match self.mode {
            PlannerMode::Slide { direction, distance } | PlannerMode::Shift { direction, distance } => {
                let frame = target_pose(&current.pose, &SurfacePatch { point: anchor, normal: patch.normal }, depth, &self.params);
                let dir_world = (frame.orientation * self.params.tool_rotation()).rotate(&direction);
                let remaining = (distance - self.travel).max(0.0);
                let step = (self.cfg.slide_speed / self.cfg.rate).min(remaining);
                let moved = slide_anchor(&anchor, patch, &dir_world, step);
                self.travel += step;
                self.anchor = Some(moved);
                let goal = target_pose(&current.pose, &SurfacePatch { point: moved, normal: patch.normal }, depth, &self.params);
                let last = distance - self.travel <= 1e-12;
                let tangent = (moved - anchor).try_normalize(1e-12).unwrap_or_else(Vector3::zeros);
                let end_velocity = if last { Vector3::zeros() } else { tangent * self.cfg.slide_speed };
                self.segment = Some(Segment::from_setpoint(&current, &goal, end_velocity, time, 1.0 / self.cfg.rate));
                self.rest = goal;
                TickOutcome::Replanned
            }
            _ => {
                self.anchor = Some(anchor);
                let goal = target_pose(&current.pose, &SurfacePatch { point: anchor, normal: patch.normal }, depth, &self.params);
                let unchanged = self.segment.as_ref().is_some_and(|s| {
                    let g = s.goal();
                    (g.position - goal.position).norm() < self.cfg.replan_distance
                        && g.orientation.angle_to(&goal.orientation) < self.cfg.replan_angle
                });
                if unchanged {
                    return TickOutcome::Kept;
                }
                let dist = (goal.position - current.pose.position).norm();
                let angle = current.pose.orientation.angle_to(&goal.orientation);
                let duration = (dist / self.cfg.max_speed).max(angle / self.cfg.max_angular_speed).max(self.cfg.min_duration);
                self.segment = Some(Segment::from_setpoint(&current, &goal, Vector3::zeros(), time, duration));
                self.rest = goal;
                TickOutcome::Replanned
            }
        }
    }
}
