//! Closed-loop execution of a scenario.
//!
//! Per control tick: read the (possibly drifted) state, run planner and
//! perception when due, sample the set point, update the wrench estimate
//! with the actuation applied over the previous tick, compute the control
//! wrench, allocate it, log, then advance physics to the next tick while
//! the force sensor samples at its own rate.

use nalgebra::Vector3;
use rayon::prelude::*;

use omnimanip::allocation::{forward_wrench, Allocator, AllocatorGeometry};
use omnimanip::dynamics::{contact_forces, contact_wrench, Plant, SimState};
use omnimanip::estimator::EstimatorState;
use omnimanip::geometry::{Frame, Wrench};
use omnimanip::impedance::{ImpedanceController, Setpoint};
use omnimanip::perception::{SurfaceEstimate, SurfacePatch};
use omnimanip::planner::{PlannerMode, SurfacePlanner};
use omnimanip::trajectory::{hold, WaypointTrajectory};

use crate::assertions::{evaluate_all, AssertionResult};
use crate::config::{EstimatorMode, ScenarioConfig, SetpointSource};
use crate::drift::DriftModel;
use crate::log::RunLog;
use crate::sensor::ForceSensor;
use crate::HarnessError;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub seed: u64,
    pub log: RunLog,
    /// Set when the run stopped early; the log holds every tick before it.
    pub error: Option<String>,
    pub assertions: Vec<AssertionResult>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.assertions.iter().all(|a| a.passed)
    }
}

enum Source {
    Hold(Setpoint),
    Waypoints(WaypointTrajectory),
    Planner { planner: Box<SurfacePlanner>, script: Vec<(f64, PlannerMode)>, next: usize },
}

impl Source {
    fn setpoint(&self, t: f64) -> Setpoint {
        match self {
            Source::Hold(sp) => *sp,
            Source::Waypoints(traj) => traj.sample(t),
            Source::Planner { planner, .. } => planner.setpoint(t),
        }
    }
}

fn perception_seed(seed: u64, tick: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tick.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

fn push3(row: &mut Vec<f64>, v: &Vector3<f64>) {
    row.extend_from_slice(v.as_slice());
}

fn push_rpy(row: &mut Vec<f64>, rpy: (f64, f64, f64)) {
    row.extend_from_slice(&[rpy.0, rpy.1, rpy.2]);
}

fn push_wrench(row: &mut Vec<f64>, w: &Wrench) {
    push3(row, &w.force);
    push3(row, &w.torque);
}

/// Runs `cfg` to completion, or until the state stops being finite.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome, HarnessError> {
    let params = cfg.params.clone();
    let nominal = params.nominal();
    let geometry = AllocatorGeometry::from_params(&params);
    let mut plant = Plant::new(params.clone(), geometry.clone(), cfg.scene.clone(), cfg.disturbance.clone())
        .with_actuator_dynamics(cfg.actuators);
    let mut allocator = Allocator::new(geometry.clone())?;
    let controller = ImpedanceController::new(&cfg.gains, &nominal.tool_rotation(), nominal.clone())?;
    let mut estimator = EstimatorState::new(cfg.estimator_gain, nominal.clone())?;
    let mut drift = DriftModel::new(&cfg.drift, cfg.seed);
    let mut sensor = ForceSensor::new(&cfg.sensor, cfg.seed)?;

    let mut source = match &cfg.setpoint {
        SetpointSource::Hold => Source::Hold(hold(&cfg.initial)),
        SetpointSource::Waypoints { depart, waypoints } => {
            Source::Waypoints(WaypointTrajectory::new(cfg.initial, *depart, waypoints))
        }
        SetpointSource::Planner { config, script } => Source::Planner {
            planner: Box::new(SurfacePlanner::new(config.clone(), nominal.clone(), cfg.initial)?),
            script: script.clone(),
            next: 0,
        },
    };

    let substeps = (cfg.physics_hz / cfg.control_hz).round() as u64;
    let plan_every = (cfg.control_hz / cfg.planner_hz).round() as u64;
    let dt_control = 1.0 / cfg.control_hz;
    let dt_physics = 1.0 / cfg.physics_hz;
    let ticks = (cfg.duration * cfg.control_hz).round() as u64;

    let mut state = SimState::at_rest(cfg.initial);
    let mut applied = Wrench::zero(Frame::Body);
    let mut surface: Option<(SurfaceEstimate, Option<SurfacePatch>)> = None;
    let mut log = RunLog::new();
    let mut error = None;

    for k in 0..=ticks {
        let t = k as f64 / cfg.control_hz;
        let measured = drift.perturb(&state);

        if let Source::Planner { planner, script, next } = &mut source {
            if k % plan_every == 0 {
                while *next < script.len() && script[*next].0 <= t + 1e-9 {
                    planner.set_mode(script[*next].1, t);
                    *next += 1;
                }
                let obs = cfg.perception.observe(
                    &state.pose,
                    &measured.pose,
                    &nominal,
                    &cfg.scene,
                    perception_seed(cfg.seed, k),
                    t,
                );
                planner.tick(t, obs.1.as_ref());
                surface = Some(obs);
            }
        }
        let sp = source.setpoint(t);

        let contact = contact_wrench(&state, &params, &cfg.scene);
        let dist = cfg.disturbance.wrench(&state, &params, state.time);
        let external = contact + dist;
        let estimate = match cfg.estimator_mode {
            EstimatorMode::Momentum => {
                estimator.update(&measured.twist, &applied, &measured.pose.orientation, dt_control)
            }
            EstimatorMode::Ideal => external,
        };
        let command = controller.control_wrench(&measured, &sp, &estimate);
        let allocation = allocator.allocate(&command).unwrap_or_else(|_| allocator.allocate_saturating(&command));
        let actuation = forward_wrench(&allocation.command, &geometry);

        let contacts = contact_forces(&state, &params, &cfg.scene);
        let tip = state.tool_tip(&params);
        let sensor_axis = cfg.sensor_primitive.map(|i| cfg.scene.primitives[i].penetration(&tip).normal);
        let est_sensor_axis =
            sensor_axis.map_or(0.0, |n| n.dot(&state.pose.orientation.rotate(&estimate.force)));

        let mut row = Vec::with_capacity(log.columns.len());
        row.push(t);
        push3(&mut row, &state.pose.position);
        push_rpy(&mut row, state.pose.orientation.to_rpy());
        push3(&mut row, &state.twist.linear);
        push3(&mut row, &state.twist.angular);
        push3(&mut row, &measured.pose.position);
        push_rpy(&mut row, measured.pose.orientation.to_rpy());
        push3(&mut row, &sp.pose.position);
        push_rpy(&mut row, sp.pose.orientation.to_rpy());
        push3(&mut row, &sp.velocity.linear);
        push3(&mut row, &sp.velocity.angular);
        push3(&mut row, &tip);
        push3(&mut row, &sp.pose.transform_point(&params.tool_offset()));
        push3(&mut row, &(state.pose.position - sp.pose.position));
        row.push(sp.pose.orientation.angle_to(&state.pose.orientation));
        push_wrench(&mut row, &estimate);
        push_wrench(&mut row, &external);
        push_wrench(&mut row, &contact);
        push_wrench(&mut row, &dist);
        push_wrench(&mut row, &command);
        push_wrench(&mut row, &actuation);
        row.extend_from_slice(&allocation.command.rotor_speeds);
        row.extend_from_slice(&allocation.command.tilt_angles);
        row.extend_from_slice(&allocation.group_thrusts);
        row.push(if allocation.saturated { 1.0 } else { 0.0 });
        row.push(allocation.scale);
        row.push(contacts.iter().map(|c| c.penetration).fold(0.0, f64::max));
        row.push(contacts.iter().map(|c| c.normal_force).sum());
        row.push(sensor.raw());
        row.push(sensor.filtered());
        row.push(est_sensor_axis);
        match &surface {
            Some((est, patch)) => {
                row.push(if est.valid { 1.0 } else { 0.0 });
                row.push(est.count as f64);
                let p = patch.unwrap_or(SurfacePatch { point: Vector3::zeros(), normal: Vector3::zeros() });
                push3(&mut row, &p.normal);
                push3(&mut row, &p.point);
            }
            None => row.extend_from_slice(&[0.0; 8]),
        }
        match &source {
            Source::Planner { planner, .. } => {
                row.push(planner.mode().code() as f64);
                row.push(planner.travel());
            }
            _ => row.extend_from_slice(&[-1.0, 0.0]),
        }
        log.push(row);

        if k == ticks {
            break;
        }
        let mut failed = false;
        for _ in 0..substeps {
            match plant.step(&state, &allocation.command, dt_physics) {
                Ok(next) => state = next,
                Err(e) => {
                    error = Some(e.to_string());
                    failed = true;
                    break;
                }
            }
            let sensed: f64 = match cfg.sensor_primitive {
                Some(i) => contact_forces(&state, &params, &cfg.scene)
                    .iter()
                    .filter(|c| c.primitive == i)
                    .map(|c| c.normal_force)
                    .sum(),
                None => 0.0,
            };
            sensor.sample_until(state.time, sensed);
        }
        if failed {
            break;
        }
        applied = actuation;
        drift.advance(dt_control);
    }

    let assertions = if error.is_none() { evaluate_all(&cfg.assertions, &log) } else { Vec::new() };
    Ok(RunOutcome { name: cfg.name.clone(), seed: cfg.seed, log, error, assertions })
}

/// Runs independent scenarios on the rayon pool; results keep input order.
pub fn run_many(configs: &[ScenarioConfig]) -> Vec<Result<RunOutcome, HarnessError>> {
    configs.par_iter().map(run_scenario).collect()
}
