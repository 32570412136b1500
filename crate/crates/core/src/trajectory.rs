//! Quintic set-point segments.

use nalgebra::{Vector3, Vector6};

use crate::geometry::{stack, Frame, Pose, Rotation, Twist};
use crate::impedance::Setpoint;

/// Quintic polynomial per axis matching position, velocity and
/// acceleration at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quintic {
    coeffs: [Vector3<f64>; 6],
    duration: f64,
}

/// Position, velocity and acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

impl Kinematics {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self { position, velocity: Vector3::zeros(), acceleration: Vector3::zeros() }
    }
}

impl Quintic {
    pub fn new(start: &Kinematics, end: &Kinematics, duration: f64) -> Self {
        assert!(duration > 0.0, "segment duration must be positive");
        let t = duration;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        let (p0, v0, a0) = (start.position, start.velocity, start.acceleration);
        let (p1, v1, a1) = (end.position, end.velocity, end.acceleration);
        let c3 = (p1 * 20.0 - p0 * 20.0 - (v1 * 8.0 + v0 * 12.0) * t - (a0 * 3.0 - a1) * t2) / (2.0 * t3);
        let c4 = (p0 * 30.0 - p1 * 30.0 + (v1 * 14.0 + v0 * 16.0) * t + (a0 * 3.0 - a1 * 2.0) * t2) / (2.0 * t4);
        let c5 = (p1 * 12.0 - p0 * 12.0 - (v1 * 6.0 + v0 * 6.0) * t - (a0 - a1) * t2) / (2.0 * t5);
        Self { coeffs: [p0, v0, a0 * 0.5, c3, c4, c5], duration }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Evaluates at `t`, clamped to the segment; past the end the state is
    /// held with zero velocity only if the end velocity was zero.
    pub fn sample(&self, t: f64) -> Kinematics {
        if t >= self.duration {
            let end = self.eval(self.duration);
            return Kinematics {
                position: end.position + end.velocity * (t - self.duration),
                velocity: end.velocity,
                acceleration: Vector3::zeros(),
            };
        }
        self.eval(t.max(0.0))
    }

    fn eval(&self, t: f64) -> Kinematics {
        let c = &self.coeffs;
        let position = c[0] + (c[1] + (c[2] + (c[3] + (c[4] + c[5] * t) * t) * t) * t) * t;
        let velocity = c[1] + (c[2] * 2.0 + (c[3] * 3.0 + (c[4] * 4.0 + c[5] * (5.0 * t)) * t) * t) * t;
        let acceleration = c[2] * 2.0 + (c[3] * 6.0 + (c[4] * 12.0 + c[5] * (20.0 * t)) * t) * t;
        Kinematics { position, velocity, acceleration }
    }
}

/// Rest-to-rest quintic time scaling `s(τ)`, `τ ∈ [0, 1]`, with its first
/// two derivatives.
pub fn min_jerk(tau: f64) -> (f64, f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let dds = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    (s, ds, dds)
}

/// Time-parameterized set points from a start state to a goal pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_time: f64,
    position: Quintic,
    start_orientation: Rotation,
    /// Rotation vector from start to goal orientation, in the start frame.
    rotation: Vector3<f64>,
}

impl Segment {
    /// Rest-to-rest motion between two poses.
    pub fn between(from: &Pose, to: &Pose, start_time: f64, duration: f64) -> Self {
        Self::from_state(&Kinematics::at_rest(from.position), &from.orientation, to, Vector3::zeros(), start_time, duration)
    }

    /// Starts from a moving position state and a resting orientation and
    /// ends at `to` with linear velocity `end_velocity`.
    pub fn from_state(
        start: &Kinematics,
        start_orientation: &Rotation,
        to: &Pose,
        end_velocity: Vector3<f64>,
        start_time: f64,
        duration: f64,
    ) -> Self {
        let end = Kinematics { position: to.position, velocity: end_velocity, acceleration: Vector3::zeros() };
        Self {
            start_time,
            position: Quintic::new(start, &end, duration),
            start_orientation: *start_orientation,
            rotation: (start_orientation.transpose() * to.orientation).log_any(),
        }
    }

    /// Starts from the current state of a set point.
    pub fn from_setpoint(sp: &Setpoint, to: &Pose, end_velocity: Vector3<f64>, start_time: f64, duration: f64) -> Self {
        let start = Kinematics {
            position: sp.pose.position,
            velocity: sp.velocity.linear,
            acceleration: sp.acceleration.fixed_rows::<3>(0).into_owned(),
        };
        Self::from_state(&start, &sp.pose.orientation, to, end_velocity, start_time, duration)
    }

    pub fn duration(&self) -> f64 {
        self.position.duration()
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    pub fn goal(&self) -> Pose {
        Pose::new(self.position.sample(self.duration()).position, self.start_orientation * Rotation::exp(&self.rotation))
    }

    pub fn sample(&self, time: f64) -> Setpoint {
        let t = time - self.start_time;
        let k = self.position.sample(t);
        let (s, ds, dds) = min_jerk(t / self.duration());
        let inv = 1.0 / self.duration();
        let orientation = self.start_orientation * Rotation::exp(&(self.rotation * s));
        let axis_world = self.start_orientation.rotate(&self.rotation);
        Setpoint {
            pose: Pose::new(k.position, orientation),
            velocity: Twist::new(k.velocity, axis_world * (ds * inv), Frame::World),
            acceleration: stack(&k.acceleration, &(axis_world * (dds * inv * inv))),
        }
    }
}

/// Stationary set point.
pub fn hold(pose: &Pose) -> Setpoint {
    Setpoint { pose: *pose, velocity: Twist::zero(Frame::World), acceleration: Vector6::zeros() }
}

/// Rest-to-rest segments through timed poses.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointTrajectory {
    segments: Vec<Segment>,
    start: Pose,
}

impl WaypointTrajectory {
    /// `waypoints` are `(arrival time, pose)` pairs in increasing time; each
    /// leg starts when the previous one arrives, or at `depart` for the first.
    pub fn new(start: Pose, depart: f64, waypoints: &[(f64, Pose)]) -> Self {
        let mut segments = Vec::with_capacity(waypoints.len());
        let mut from = start;
        let mut t0 = depart;
        for (t1, pose) in waypoints {
            if *t1 > t0 {
                segments.push(Segment::between(&from, pose, t0, t1 - t0));
            }
            from = *pose;
            t0 = t0.max(*t1);
        }
        Self { segments, start }
    }

    pub fn sample(&self, time: f64) -> Setpoint {
        match self.segments.iter().rev().find(|s| time >= s.start_time) {
            Some(seg) if time <= seg.end_time() + 1e-9 => seg.sample(time),
            Some(seg) => hold(&seg.goal()),
            None => hold(&self.start),
        }
    }
}
