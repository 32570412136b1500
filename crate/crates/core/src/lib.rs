//! Simulation and control of an omnidirectional tilt-rotor aerial
//! manipulator: rigid-body dynamics with tool-tip contact, a momentum-based
//! wrench observer, selective impedance control, wrench allocation, depth
//! based surface estimation and a surface-relative set-point planner.

pub mod allocation;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod impedance;
pub mod perception;
pub mod planner;
pub mod scene;
pub mod trajectory;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/frames.md")]
    mod frames {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/estimator.md")]
    mod estimator {}
    #[doc = include_str!("../../../book/src/impedance.md")]
    mod impedance {}
    #[doc = include_str!("../../../book/src/allocation.md")]
    mod allocation {}
    #[doc = include_str!("../../../book/src/perception.md")]
    mod perception {}
    #[doc = include_str!("../../../book/src/planner.md")]
    mod planner {}
}
