//! Stationary-frame single-machine infinite-bus (SMIB) analysis.
//!
//! The crate models a round-rotor synchronous machine with constant field
//! current connected through an RL stator branch to an ideal bus, and
//! provides:
//!
//! - [`model`]: parameters, the αβ-frame vector field, torque/EMF/power and
//!   the angle embedding onto the co-energy manifold;
//! - [`steady_state`]: the existence indicator and all synchronous periodic
//!   motions;
//! - [`certificate`]: the periodic storage function, the dissipation matrix,
//!   the η feasibility analysis and the resulting stability verdict;
//! - [`linearization`]: rotating-frame coordinates, the Jacobian at a steady
//!   state and a small dense eigensolver;
//! - [`simulator`]: fixed and adaptive Runge-Kutta integration, Lyapunov
//!   monitoring and Monte Carlo checks of the attraction estimate.
//!
//! Everything is `no_std` with `alloc`; file formats, configuration and the
//! command-line tool live in the `smib` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod certificate;
pub mod fixtures;
pub mod linearization;
mod math;
pub mod model;
pub mod simulator;
pub mod steady_state;

pub use num_complex::Complex64 as Complex;

pub use certificate::{certify, Certificate, EtaChoice, EtaInterval, EtaMode, QMatrix, Verdict};
pub use linearization::{eig4, jacobian_at, linearize, LinearizationResult};
pub use model::{
    EmbeddedState, GridParams, MachineParams, ParamError, PhysicalState, StateDerivative,
    UnitSystem, VoltageSource,
};
pub use simulator::{integrate, BasinReport, Method, SimOptions, Trajectory};
pub use steady_state::{existence_indicator, solve_steady_states, ExistenceReport, SteadyState};
