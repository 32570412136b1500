//! Generalized-momentum observer for the external wrench.
//!
//! With `p = M v` the observer integrates the modelled momentum rate and
//! reads the external wrench off the mismatch:
//!
//! ```text
//! I_k   = I_{k−1} + (τ_a − C v − g + τ̂_e)_{k−1} · dt
//! τ̂_e,k = K_I (M v_k − I_k)
//! ```
//!
//! so that `τ̂_e` follows `τ_e` through a first-order lag of rate `K_I`.
//! Only velocities and the commanded actuation are needed.

use nalgebra::Vector6;

use crate::dynamics::{coriolis_term, gravity_term, VehicleParams};
use crate::geometry::{Frame, Rotation, Twist, Wrench};
use crate::{Error, Result};

/// Observer gains, integral and last estimate.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    gain: Vector6<f64>,
    params: VehicleParams,
    integral: Vector6<f64>,
    estimate: Vector6<f64>,
    previous: Option<(Twist, Rotation)>,
}

impl EstimatorState {
    /// `gain` holds the diagonal of `K_I` [1/s].
    pub fn new(gain: Vector6<f64>, params: VehicleParams) -> Result<Self> {
        if let Some((axis, value)) = gain.iter().enumerate().find(|(_, g)| !(**g > 0.0)) {
            return Err(Error::NonPositiveGain { name: "K_I", axis, value: *value });
        }
        Ok(Self { gain, params, integral: Vector6::zeros(), estimate: Vector6::zeros(), previous: None })
    }

    /// Unity gain on every axis.
    pub fn unity(params: VehicleParams) -> Self {
        Self::new(Vector6::repeat(1.0), params).expect("unity gain is positive")
    }

    pub fn gain(&self) -> &Vector6<f64> {
        &self.gain
    }

    pub fn estimate(&self) -> Wrench {
        Wrench::from_vector(&self.estimate, Frame::Body)
    }

    /// Re-seeds the integral so the estimate is zero at the given velocity.
    pub fn reset(&mut self, v: &Twist, r: &Rotation) {
        self.integral = self.params.mass_matrix() * v.to_vector();
        self.estimate = Vector6::zeros();
        self.previous = Some((*v, *r));
    }

    /// Advances by `dt` and returns the new estimate. `actuation` is the
    /// wrench commanded over the interval that just ended; `v` and `r` are
    /// the state at its end.
    ///
    /// The first call after construction only latches the state.
    pub fn update(&mut self, v: &Twist, actuation: &Wrench, r: &Rotation, dt: f64) -> Wrench {
        let Some((v_prev, r_prev)) = self.previous else {
            self.reset(v, r);
            return self.estimate();
        };
        let rate = actuation.to_vector()
            - coriolis_term(&v_prev, &self.params).to_vector()
            - gravity_term(&r_prev, &self.params).to_vector()
            + self.estimate;
        self.integral += rate * dt;
        let momentum = self.params.mass_matrix() * v.to_vector();
        self.estimate = self.gain.component_mul(&(momentum - self.integral));
        self.previous = Some((*v, *r));
        self.estimate()
    }
}

/// Free-function form of [`EstimatorState::update`].
pub fn estimator_update(est: &mut EstimatorState, v: &Twist, actuation: &Wrench, r: &Rotation, dt: f64) -> Wrench {
    est.update(v, actuation, r, dt)
}

/// Free-function form of [`EstimatorState::reset`]; returns the reset state.
pub fn estimator_reset(mut est: EstimatorState, v: &Twist, r: &Rotation) -> EstimatorState {
    est.reset(v, r);
    est
}
