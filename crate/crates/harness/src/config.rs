//! Scenario files.
//!
//! A scenario is a TOML document with `schema_version = 1`. Every table
//! other than the top-level keys is optional and falls back to the
//! defaults below. `--override a.b=value` edits the parsed document before
//! it is interpreted, so any key can be changed from the command line.

use std::path::Path;

use nalgebra::{Vector3, Vector6};
use serde::Deserialize;

use omnimanip::dynamics::{ActuatorDynamics, DisturbanceProfile, Pull, PullPoint, VehicleParams};
use omnimanip::estimator::EstimatorState;
use omnimanip::geometry::{Pose, Rotation};
use omnimanip::impedance::{self, GainFrame, ImpedanceGains};
use omnimanip::perception::{CameraModel, SurfaceSensor};
use omnimanip::planner::{PlannerConfig, PlannerMode};
use omnimanip::scene::{Primitive, Scene};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

type V3 = [f64; 3];
type V6 = [f64; 6];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub gains: GainsSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub disturbance: DisturbanceSection,
    #[serde(default)]
    pub setpoint: SetpointSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub perception: PerceptionSection,
    #[serde(default)]
    pub drift: DriftSection,
    #[serde(default)]
    pub actuators: ActuatorSection,
    #[serde(default)]
    pub sensor: SensorSection,
    #[serde(default)]
    pub assertions: Vec<AssertionSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSection {
    pub mass: f64,
    pub inertia: V3,
    pub arm_pitch_deg: f64,
    pub tool_length: f64,
    pub group_distance: f64,
    pub max_group_thrust: f64,
    pub com_offset: V3,
}

impl Default for VehicleSection {
    fn default() -> Self {
        let p = VehicleParams::default();
        Self {
            mass: p.mass,
            inertia: p.inertia.into(),
            arm_pitch_deg: p.arm_pitch.to_degrees(),
            tool_length: p.tool_length,
            group_distance: p.group_distance,
            max_group_thrust: p.max_group_thrust,
            com_offset: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub position: V3,
    /// Roll, pitch, yaw (Z-Y-X) in degrees.
    pub rpy_deg: V3,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { position: [0.0, 0.0, 1.0], rpy_deg: [0.0; 3] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub preset: Option<String>,
    pub inertia: Option<V6>,
    pub damping: Option<V6>,
    pub stiffness: Option<V6>,
    pub frame: Option<FrameName>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FrameName {
    Tool,
    Body,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Momentum observer.
    #[default]
    Momentum,
    /// True external wrench fed straight to the controller.
    Ideal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub mode: EstimatorMode,
    pub gain: V6,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self { mode: EstimatorMode::Momentum, gain: [1.0; 6] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub physics_hz: f64,
    pub control_hz: f64,
    pub planner_hz: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        Self { physics_hz: 1000.0, control_hz: 250.0, planner_hz: 5.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub point: V3,
    pub normal: V3,
    /// Contact with this plane is measured by the force sensor.
    #[serde(default)]
    pub sensor: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderSpec {
    pub axis_point: V3,
    pub axis: V3,
    pub radius: f64,
    #[serde(default = "yes")]
    pub concave: bool,
    #[serde(default)]
    pub sensor: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub planes: Vec<PlaneSpec>,
    pub cylinders: Vec<CylinderSpec>,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub friction: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        let s = Scene::empty();
        Self {
            planes: Vec::new(),
            cylinders: Vec::new(),
            contact_stiffness: s.contact_stiffness,
            contact_damping: s.contact_damping,
            friction: s.friction,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum PointName {
    #[default]
    ToolTip,
    BodyOrigin,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullSpec {
    pub start: f64,
    #[serde(default = "one")]
    pub ramp: f64,
    #[serde(default = "two")]
    pub hold: f64,
    pub magnitude: f64,
    pub direction: V3,
    #[serde(default)]
    pub point: PointName,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSection {
    pub pulls: Vec<PullSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum SetpointKind {
    #[default]
    Hold,
    Waypoints,
    Planner,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum WaypointFrame {
    #[default]
    Body,
    ToolTip,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    /// Arrival time [s].
    pub time: f64,
    pub position: V3,
    pub rpy_deg: V3,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetpointSection {
    pub kind: SetpointKind,
    pub frame: WaypointFrame,
    /// Departure time of the first leg [s].
    pub depart: f64,
    pub waypoints: Vec<WaypointSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Approach,
    Press,
    Slide,
    Shift,
    Retreat,
    Hold,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    pub at: f64,
    pub mode: ModeName,
    /// Tool-frame direction for slide and shift.
    #[serde(default)]
    pub direction: Option<V3>,
    #[serde(default)]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub penetration_offset: f64,
    pub standoff: f64,
    pub slide_speed: f64,
    pub max_speed: f64,
    pub max_angular_speed: f64,
    pub min_duration: f64,
    pub invalid_timeout: f64,
    pub script: Vec<ScriptStep>,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let c = PlannerConfig::default();
        Self {
            penetration_offset: c.penetration_offset,
            standoff: c.standoff,
            slide_speed: c.slide_speed,
            max_speed: c.max_speed,
            max_angular_speed: c.max_angular_speed,
            min_duration: c.min_duration,
            invalid_timeout: c.invalid_timeout,
            script: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionSection {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub max_range: f64,
    pub min_range: f64,
    pub noise_std: f64,
    pub mount_offset: f64,
    pub axis_radius: f64,
    pub min_points: usize,
}

impl Default for PerceptionSection {
    fn default() -> Self {
        let s = SurfaceSensor::default();
        Self {
            width: s.camera.width,
            height: s.camera.height,
            hfov_deg: s.camera.hfov.to_degrees(),
            max_range: s.camera.max_range,
            min_range: s.camera.min_range,
            noise_std: s.camera.noise_std,
            mount_offset: s.camera.mount_offset,
            axis_radius: s.axis_radius,
            min_points: s.min_points,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftSection {
    pub enabled: bool,
    /// Random-walk standard deviation after one minute, per position axis [m].
    pub position_per_minute: f64,
    /// Random-walk standard deviation after one minute in yaw [deg].
    pub yaw_deg_per_minute: f64,
    /// White noise on each position axis [m].
    pub position_noise: f64,
    /// White noise on yaw [deg].
    pub yaw_noise_deg: f64,
}

impl Default for DriftSection {
    fn default() -> Self {
        Self { enabled: false, position_per_minute: 0.01, yaw_deg_per_minute: 0.1, position_noise: 0.0005, yaw_noise_deg: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorModel {
    #[default]
    Ideal,
    Lag,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorSection {
    pub model: ActuatorModel,
    pub rotor_time_constant: f64,
    pub servo_time_constant: f64,
}

impl Default for ActuatorSection {
    fn default() -> Self {
        Self { model: ActuatorModel::Ideal, rotor_time_constant: 0.03, servo_time_constant: 0.06 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub rate_hz: f64,
    pub resolution: f64,
    pub noise_std: f64,
    pub filter_order: usize,
    pub filter_cutoff_hz: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self { rate_hz: 800.0, resolution: 0.1, noise_std: 0.05, filter_order: 5, filter_cutoff_hz: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Largest absolute value.
    MaxAbs,
    Max,
    Min,
    Mean,
    /// Root mean square of `column − reference`.
    Rmse,
    /// Longest uninterrupted stretch with a non-zero value [s].
    LongestRun,
    /// Fraction of samples with a strictly positive value.
    FractionPositive,
    /// Last value minus first value.
    Change,
    /// Change divided by the window length.
    Rate,
}

/// A pass/fail check evaluated on the finished log.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertionSpec {
    pub name: String,
    pub metric: Metric,
    pub column: String,
    #[serde(default)]
    pub reference: Option<String>,
    /// Windows `[from, to]` [s]; the whole run when absent. Each window is
    /// checked separately.
    #[serde(default)]
    pub windows: Vec<[f64; 2]>,
    #[serde(default)]
    pub below: Option<f64>,
    #[serde(default)]
    pub above: Option<f64>,
}

/// Parses a scenario document, applying `key=value` overrides first.
pub fn parse(text: &str, overrides: &[String]) -> Result<ScenarioFile, HarnessError> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
    for ov in overrides {
        apply_override(&mut doc, ov)?;
    }
    let file: ScenarioFile = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::Config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    Ok(file)
}

pub fn load(path: &Path, overrides: &[String]) -> Result<ScenarioFile, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse(&text, overrides)
}

/// Sets a dotted key. The value is read as a TOML value when possible and
/// as a bare string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), HarnessError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn v3(a: V3) -> Vector3<f64> {
    Vector3::from(a)
}

fn unit(a: V3, what: &str) -> Result<Vector3<f64>, HarnessError> {
    v3(a)
        .try_normalize(1e-12)
        .ok_or_else(|| HarnessError::Config(format!("{what} must be non-zero")))
}

/// Where set points come from.
#[derive(Debug, Clone)]
pub enum SetpointSource {
    Hold,
    Waypoints { depart: f64, waypoints: Vec<(f64, Pose)> },
    Planner { config: PlannerConfig, script: Vec<(f64, PlannerMode)> },
}

/// Fully interpreted scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: String,
    pub duration: f64,
    pub seed: u64,
    pub params: VehicleParams,
    pub initial: Pose,
    pub gains: ImpedanceGains,
    pub estimator_mode: EstimatorMode,
    pub estimator_gain: Vector6<f64>,
    pub physics_hz: f64,
    pub control_hz: f64,
    pub planner_hz: f64,
    pub scene: Scene,
    /// Primitive whose contact the force sensor measures.
    pub sensor_primitive: Option<usize>,
    pub disturbance: DisturbanceProfile,
    pub setpoint: SetpointSource,
    pub perception: SurfaceSensor,
    pub drift: DriftSection,
    pub actuators: ActuatorDynamics,
    pub sensor: SensorSection,
    pub assertions: Vec<AssertionSpec>,
}

impl ScenarioConfig {
    pub fn from_file(file: ScenarioFile) -> Result<Self, HarnessError> {
        if !(file.duration > 0.0) {
            return Err(HarnessError::Config("duration must be positive".into()));
        }
        let v = &file.vehicle;
        let params = VehicleParams {
            mass: v.mass,
            inertia: v3(v.inertia),
            arm_pitch: v.arm_pitch_deg.to_radians(),
            tool_length: v.tool_length,
            group_distance: v.group_distance,
            max_group_thrust: v.max_group_thrust,
            com_offset: v3(v.com_offset),
            ..VehicleParams::default()
        };
        params.validate()?;

        let gains = resolve_gains(&file.gains, &params.nominal())?;
        gains.validate()?;
        EstimatorState::new(Vector6::from(file.estimator.gain), params.nominal())?;

        let r = &file.rates;
        if !(r.physics_hz > 0.0 && r.control_hz > 0.0 && r.planner_hz > 0.0) {
            return Err(HarnessError::Config("rates must be positive".into()));
        }
        let ratio = r.physics_hz / r.control_hz;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(HarnessError::Config("physics rate must be an integer multiple of the control rate".into()));
        }
        let ratio = r.control_hz / r.planner_hz;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(HarnessError::Config("control rate must be an integer multiple of the planner rate".into()));
        }

        let (scene, sensor_primitive) = build_scene(&file.scene)?;
        scene.validate()?;

        let mut pulls = Vec::new();
        for p in &file.disturbance.pulls {
            pulls.push(Pull {
                start: p.start,
                ramp: p.ramp,
                hold: p.hold,
                magnitude: p.magnitude,
                direction: unit(p.direction, "pull direction")?,
                point: match p.point {
                    PointName::ToolTip => PullPoint::ToolTip,
                    PointName::BodyOrigin => PullPoint::BodyOrigin,
                },
            });
        }
        let disturbance = DisturbanceProfile { pulls };
        disturbance.validate()?;

        let initial = pose_from(file.initial.position, file.initial.rpy_deg);
        let setpoint = build_setpoint(&file, &params)?;

        let pc = &file.perception;
        let perception = SurfaceSensor {
            camera: CameraModel {
                width: pc.width,
                height: pc.height,
                hfov: pc.hfov_deg.to_radians(),
                max_range: pc.max_range,
                min_range: pc.min_range,
                noise_std: pc.noise_std,
                mount_offset: pc.mount_offset,
            },
            axis_radius: pc.axis_radius,
            min_points: pc.min_points,
        };
        perception.validate()?;

        let actuators = match file.actuators.model {
            ActuatorModel::Ideal => ActuatorDynamics::Ideal,
            ActuatorModel::Lag => ActuatorDynamics::FirstOrderLag {
                rotor_time_constant: file.actuators.rotor_time_constant,
                servo_time_constant: file.actuators.servo_time_constant,
            },
        };
        let s = &file.sensor;
        if !(s.rate_hz > 2.0 * s.filter_cutoff_hz) || s.filter_order == 0 || !(s.resolution >= 0.0) {
            return Err(HarnessError::Config("sensor rate must exceed twice the filter cutoff".into()));
        }
        for a in &file.assertions {
            if a.metric == Metric::Rmse && a.reference.is_none() {
                return Err(HarnessError::Config(format!("assertion `{}` needs a reference column", a.name)));
            }
        }

        Ok(Self {
            name: file.name,
            description: file.description,
            duration: file.duration,
            seed: file.seed,
            params,
            initial,
            gains,
            estimator_mode: file.estimator.mode,
            estimator_gain: Vector6::from(file.estimator.gain),
            physics_hz: r.physics_hz,
            control_hz: r.control_hz,
            planner_hz: r.planner_hz,
            scene,
            sensor_primitive,
            disturbance,
            setpoint,
            perception,
            drift: file.drift,
            actuators,
            sensor: file.sensor,
            assertions: file.assertions,
        })
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        Self::from_file(parse(text, overrides)?)
    }
}

fn pose_from(position: V3, rpy_deg: V3) -> Pose {
    Pose::new(v3(position), Rotation::from_rpy(rpy_deg[0].to_radians(), rpy_deg[1].to_radians(), rpy_deg[2].to_radians()))
}

fn resolve_gains(g: &GainsSection, params: &VehicleParams) -> Result<ImpedanceGains, HarnessError> {
    let mut gains = match &g.preset {
        Some(name) => {
            let preset = impedance::preset(name).ok_or_else(|| HarnessError::Config(format!("unknown gain preset `{name}`")))?;
            if (preset.arm_pitch_deg - params.arm_pitch.to_degrees()).abs() > 1e-9 {
                return Err(HarnessError::Config(format!(
                    "preset `{name}` expects an arm pitch of {}°",
                    preset.arm_pitch_deg
                )));
            }
            preset.gains(params)
        }
        None => ImpedanceGains {
            inertia: Vector6::repeat(1.0),
            damping: Vector6::repeat(f64::NAN),
            stiffness: Vector6::repeat(f64::NAN),
            frame: GainFrame::Tool,
        },
    };
    if let Some(m) = g.inertia {
        gains.inertia = Vector6::from(m);
    }
    if let Some(d) = g.damping {
        gains.damping = Vector6::from(d);
    }
    if let Some(k) = g.stiffness {
        gains.stiffness = Vector6::from(k);
    }
    if let Some(f) = g.frame {
        gains.frame = match f {
            FrameName::Tool => GainFrame::Tool,
            FrameName::Body => GainFrame::Body,
        };
    }
    if gains.damping.iter().chain(gains.stiffness.iter()).any(|x| x.is_nan()) {
        return Err(HarnessError::Config("gains need a preset or explicit damping and stiffness".into()));
    }
    Ok(gains)
}

fn build_scene(s: &SceneSection) -> Result<(Scene, Option<usize>), HarnessError> {
    let mut scene = Scene::empty();
    scene.contact_stiffness = s.contact_stiffness;
    scene.contact_damping = s.contact_damping;
    scene.friction = s.friction;
    let mut sensor = None;
    let mut flag = |sensor_flag: bool, index: usize| -> Result<(), HarnessError> {
        if sensor_flag {
            if sensor.is_some() {
                return Err(HarnessError::Config("only one primitive can carry the force sensor".into()));
            }
            sensor = Some(index);
        }
        Ok(())
    };
    for p in &s.planes {
        flag(p.sensor, scene.primitives.len())?;
        scene.primitives.push(Primitive::plane(v3(p.point), unit(p.normal, "plane normal")?));
    }
    for c in &s.cylinders {
        flag(c.sensor, scene.primitives.len())?;
        scene.primitives.push(Primitive::Cylinder {
            axis_point: v3(c.axis_point),
            axis: unit(c.axis, "cylinder axis")?,
            radius: c.radius,
            concave: c.concave,
        });
    }
    Ok((scene, sensor))
}

fn build_setpoint(file: &ScenarioFile, params: &VehicleParams) -> Result<SetpointSource, HarnessError> {
    let sp = &file.setpoint;
    Ok(match sp.kind {
        SetpointKind::Hold => SetpointSource::Hold,
        SetpointKind::Waypoints => {
            let mut waypoints = Vec::new();
            let mut last = sp.depart;
            for w in &sp.waypoints {
                if w.time < last {
                    return Err(HarnessError::Config("waypoint times must not decrease".into()));
                }
                last = w.time;
                let mut pose = pose_from(w.position, w.rpy_deg);
                if sp.frame == WaypointFrame::ToolTip {
                    pose.position -= pose.orientation.rotate(&params.tool_offset());
                }
                waypoints.push((w.time, pose));
            }
            SetpointSource::Waypoints { depart: sp.depart, waypoints }
        }
        SetpointKind::Planner => {
            let p = &file.planner;
            let config = PlannerConfig {
                penetration_offset: p.penetration_offset,
                standoff: p.standoff,
                slide_speed: p.slide_speed,
                rate: file.rates.planner_hz,
                max_speed: p.max_speed,
                max_angular_speed: p.max_angular_speed,
                min_duration: p.min_duration,
                invalid_timeout: p.invalid_timeout,
                ..PlannerConfig::default()
            };
            config.validate()?;
            let mut script = Vec::new();
            for step in &p.script {
                let motion = || -> Result<(Vector3<f64>, f64), HarnessError> {
                    let d = step.direction.ok_or_else(|| HarnessError::Config("slide and shift need a direction".into()))?;
                    let dist = step.distance.ok_or_else(|| HarnessError::Config("slide and shift need a distance".into()))?;
                    Ok((unit(d, "slide direction")?, dist))
                };
                let mode = match step.mode {
                    ModeName::Approach => PlannerMode::Approach,
                    ModeName::Press => PlannerMode::Press,
                    ModeName::Retreat => PlannerMode::Retreat,
                    ModeName::Hold => PlannerMode::Hold,
                    ModeName::Slide => {
                        let (direction, distance) = motion()?;
                        PlannerMode::Slide { direction, distance }
                    }
                    ModeName::Shift => {
                        let (direction, distance) = motion()?;
                        PlannerMode::Shift { direction, distance }
                    }
                };
                script.push((step.at, mode));
            }
            if script.windows(2).any(|w| w[1].0 < w[0].0) {
                return Err(HarnessError::Config("planner script must be ordered in time".into()));
            }
            SetpointSource::Planner { config, script }
        }
    })
}
