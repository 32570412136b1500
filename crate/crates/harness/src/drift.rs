//! Odometry drift fed to everything downstream of the state estimate.
//!
//! Position and yaw follow independent random walks whose standard
//! deviation grows as `σ₁·√(t / 60 s)`, with white noise on top. The true
//! state stays untouched so the log can record both.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use omnimanip::dynamics::SimState;
use omnimanip::geometry::{Pose, Rotation};

use crate::config::DriftSection;

const STREAM: u64 = 0x64_7269_6674;

#[derive(Debug, Clone)]
pub struct DriftModel {
    enabled: bool,
    walk_rate: f64,
    yaw_rate: f64,
    position_noise: f64,
    yaw_noise: f64,
    rng: ChaCha8Rng,
    position: Vector3<f64>,
    yaw: f64,
}

impl DriftModel {
    pub fn new(cfg: &DriftSection, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM);
        Self {
            enabled: cfg.enabled,
            walk_rate: cfg.position_per_minute / 60f64.sqrt(),
            yaw_rate: cfg.yaw_deg_per_minute.to_radians() / 60f64.sqrt(),
            position_noise: cfg.position_noise,
            yaw_noise: cfg.yaw_noise_deg.to_radians(),
            rng,
            position: Vector3::zeros(),
            yaw: 0.0,
        }
    }

    pub fn disabled() -> Self {
        Self::new(&DriftSection { enabled: false, ..DriftSection::default() }, 0)
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Advances the random walk by `dt`.
    pub fn advance(&mut self, dt: f64) {
        if !self.enabled {
            return;
        }
        let s = self.walk_rate * dt.sqrt();
        let w = Vector3::new(self.normal(), self.normal(), self.normal());
        self.position += w * s;
        self.yaw += self.normal() * self.yaw_rate * dt.sqrt();
    }

    /// Accumulated walk: position offset and yaw offset.
    pub fn offset(&self) -> (Vector3<f64>, f64) {
        (self.position, self.yaw)
    }

    /// State as the controller sees it.
    pub fn perturb(&mut self, truth: &SimState) -> SimState {
        if !self.enabled {
            return *truth;
        }
        let n = Vector3::new(self.normal(), self.normal(), self.normal()) * self.position_noise;
        let yaw = self.yaw + self.normal() * self.yaw_noise;
        let mut out = *truth;
        out.pose = Pose::new(truth.pose.position + self.position + n, Rotation::about_z(yaw) * truth.pose.orientation);
        out
    }
}
