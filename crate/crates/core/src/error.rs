use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not a rotation (|RᵀR − I| = {orthonormality:e}, det = {determinant})")]
    InvalidRotation { orthonormality: f64, determinant: f64 },

    #[error("rotation angle too close to π for a unique rotation vector (trace = {trace})")]
    AngleNearPi { trace: f64 },

    #[error("simulation state became non-finite at t = {time} s")]
    NonFiniteState { time: f64 },

    #[error("time step {dt} s outside (0, {max}] s")]
    InvalidTimeStep { dt: f64, max: f64 },

    #[error("impedance gain {name}[{axis}] = {value} must be positive")]
    NonPositiveGain { name: &'static str, axis: usize, value: f64 },

    #[error("torque demand alone needs {thrust:.3} N on rotor group {group} (limit {limit} N)")]
    Infeasible { group: usize, thrust: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
