//! Reference parameter set: a per-unit round-rotor generator on a stiff bus.
//!
//! The machine constants come from a classic textbook example (inertia
//! given as `Jω̄²/2 = 1.765`, `λω̄ = 0.7107`, 5 % speed regulation). The
//! mechanical torque is not part of that table; it follows from torque
//! balance at the operating point, `Tm = Kω̄ + T̄e = 19·1 + 0.2 = 19.2`.

use core::f64::consts::TAU;

use crate::model::{GridParams, MachineParams, UnitSystem};

/// Base frequency of a 60 Hz system in rad/s.
pub const OMEGA_BASE_60HZ: f64 = TAU * 60.0;

pub fn machine() -> MachineParams {
    MachineParams {
        inertia: 2.0 * 1.765,
        damping: 19.0,
        mech_torque: 19.0 + 0.2,
        inductance: 2.1,
        resistance: 0.0211,
        field_flux: 0.7107,
    }
}

pub fn grid() -> GridParams {
    GridParams {
        frequency: 1.0,
        voltage: 1.0,
        phase0: 0.0,
    }
}

pub fn units() -> UnitSystem {
    UnitSystem::PerUnit {
        omega_base: OMEGA_BASE_60HZ,
    }
}

/// The reference machine with the inertia reduced to `0.1`.
///
/// Steady states are unchanged (they do not depend on inertia), but the
/// region-of-attraction condition on η becomes satisfiable.
pub fn low_inertia_machine() -> MachineParams {
    MachineParams {
        inertia: 0.1,
        ..machine()
    }
}
