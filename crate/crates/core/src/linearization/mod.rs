//! Linearization in the frame rotating with the bus.
//!
//! The real coordinates are
//! `z = (θ − ω̄t − φ0, ω, Re{I* e^{j(ω̄t+φ0)}}, Im{I* e^{j(ω̄t+φ0)}})`,
//! in which a synchronous steady state is an equilibrium of an autonomous
//! field.

mod eig;

pub use eig::{
    char_poly, char_residual, eig4, sort_eigenvalues, EigenError, EIG_RESIDUAL_REL,
    POLISH_ITERATIONS,
};

use num_complex::Complex64;
use thiserror::Error;

use crate::math::{self, cis};
use crate::model::{dynamics_rhs, GridParams, MachineParams, PhysicalState};
use crate::steady_state::SteadyState;

/// Maximum difference of the rotating field between two evaluation times.
pub const TOL_AUTONOMOUS: f64 = 1e-9;
/// Relative finite-difference step before rounding to a power of two.
pub const FD_STEP_REL: f64 = 1e-6;
/// Second evaluation time of the autonomy check.
const PROBE_TIME: f64 = 1.234_567;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearizationError {
    #[error("rotating-frame field changes with time by {difference:e}")]
    NotAutonomous { difference: f64 },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearizationResult {
    pub jacobian: [[f64; 4]; 4],
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: [Complex64; 4],
}

impl LinearizationResult {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn unstable_count(&self) -> usize {
        self.eigenvalues.iter().filter(|z| z.re > 0.0).count()
    }
}

/// Rotating-frame coordinates of `state` at time `t`.
pub fn rotating_coords(
    state: &PhysicalState,
    t: f64,
    ss: &SteadyState,
    grid: &GridParams,
) -> [f64; 4] {
    let phase = ss.omega * t + grid.phase0;
    let w = state.current.conj() * cis(phase);
    [state.theta - phase, state.omega, w.re, w.im]
}

/// Inverse of [`rotating_coords`].
pub fn from_rotating(z: &[f64; 4], t: f64, ss: &SteadyState, grid: &GridParams) -> PhysicalState {
    let phase = ss.omega * t + grid.phase0;
    let current = Complex64::new(z[2], z[3]).conj() * cis(phase);
    PhysicalState::new(z[0] + phase, z[1], current)
}

/// The field `ż` evaluated through the stationary-frame equations at `t`.
pub fn rotating_field(
    z: &[f64; 4],
    t: f64,
    ss: &SteadyState,
    m: &MachineParams,
    grid: &GridParams,
) -> [f64; 4] {
    let x = from_rotating(z, t, ss, grid);
    let d = dynamics_rhs(t, &x, m, grid);
    let phase = ss.omega * t + grid.phase0;
    let w = Complex64::new(z[2], z[3]);
    let dw = d.dcurrent.conj() * cis(phase) + Complex64::new(0.0, ss.omega) * w;
    [d.dtheta - ss.omega, d.domega, dw.re, dw.im]
}

fn power_of_two_step(x: f64) -> f64 {
    let h = FD_STEP_REL * math::abs(x).max(1.0);
    libm::exp2(libm::floor(libm::log2(h)))
}

/// Central-difference Jacobian of the rotating field at the steady state.
pub fn jacobian_at(
    ss: &SteadyState,
    m: &MachineParams,
    grid: &GridParams,
) -> Result<[[f64; 4]; 4], LinearizationError> {
    let z0 = rotating_coords(&ss.state_at(0.0, grid), 0.0, ss, grid);

    let mut difference = 0.0f64;
    let probes = [z0, [z0[0] + 0.3, z0[1] + 0.02, z0[2] - 0.1, z0[3] + 0.05]];
    for z in &probes {
        let a = rotating_field(z, 0.0, ss, m, grid);
        let b = rotating_field(z, PROBE_TIME, ss, m, grid);
        for i in 0..4 {
            difference = difference.max(math::abs(a[i] - b[i]));
        }
    }
    if !(difference < TOL_AUTONOMOUS) {
        return Err(LinearizationError::NotAutonomous { difference });
    }

    let mut jac = [[0.0; 4]; 4];
    for j in 0..4 {
        let h = power_of_two_step(z0[j]);
        let mut zp = z0;
        let mut zm = z0;
        zp[j] += h;
        zm[j] -= h;
        let fp = rotating_field(&zp, 0.0, ss, m, grid);
        let fm = rotating_field(&zm, 0.0, ss, m, grid);
        for i in 0..4 {
            jac[i][j] = (fp[i] - fm[i]) / (zp[j] - zm[j]);
        }
    }
    Ok(jac)
}

pub fn linearize(
    ss: &SteadyState,
    m: &MachineParams,
    grid: &GridParams,
) -> Result<LinearizationResult, LinearizationError> {
    let jacobian = jacobian_at(ss, m, grid)?;
    let eigenvalues = eig4(&jacobian)?;
    Ok(LinearizationResult {
        jacobian,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::steady_state::solve_steady_states;

    fn close(a: Complex64, re: f64, im: f64, tol: f64) -> bool {
        (a - Complex64::new(re, im)).norm() < tol
    }

    #[test]
    fn first_row_is_structural() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        for ss in solve_steady_states(&m, &g).unwrap() {
            let jac = jacobian_at(&ss, &m, &g).unwrap();
            assert_eq!(jac[0], [0.0, 1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn published_eigenvalues() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let ss = solve_steady_states(&m, &g).unwrap();
        let a = linearize(&ss[0], &m, &g).unwrap();
        let e = a.eigenvalues;
        assert!(close(e[0], -5.3679, 0.0, 1e-3));
        assert!(close(e[1], -0.01450, 0.0, 1e-3));
        assert!(close(e[2], -0.01006, -0.99994, 1e-3));
        assert!(close(e[3], -0.01006, 0.99994, 1e-3));
        assert_eq!(a.unstable_count(), 0);

        let b = linearize(&ss[1], &m, &g).unwrap();
        let e = b.eigenvalues;
        assert!(close(e[0], -5.3968, 0.0, 1e-3));
        assert!(close(e[1], -0.01006, -0.99994, 1e-3));
        assert!(close(e[2], -0.01006, 0.99994, 1e-3));
        assert!(close(e[3], 0.01442, 0.0, 1e-3));
        assert_eq!(b.unstable_count(), 1);
    }

    #[test]
    fn steady_orbit_is_constant_in_rotating_frame() {
        let m = fixtures::machine();
        let g = GridParams::new(1.0, 1.0, 0.4).unwrap();
        let ss = solve_steady_states(&m, &g).unwrap()[0];
        let z0 = rotating_coords(&ss.state_at(0.0, &g), 0.0, &ss, &g);
        for t in [0.5, 3.0, 3.0 + g.period()] {
            let z = rotating_coords(&ss.state_at(t, &g), t, &ss, &g);
            for i in 0..4 {
                assert!((z[i] - z0[i]).abs() < 1e-9);
            }
        }
        let f = rotating_field(&z0, 0.0, &ss, &m, &g);
        assert!(f.iter().all(|x| x.abs() < 1e-10), "{f:?}");
    }

    #[test]
    fn round_trip() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let ss = solve_steady_states(&m, &g).unwrap()[0];
        let x = PhysicalState::new(0.3, 1.1, Complex64::new(0.2, -0.4));
        let y = from_rotating(&rotating_coords(&x, 2.5, &ss, &g), 2.5, &ss, &g);
        assert!((x.theta - y.theta).abs() < 1e-12);
        assert!((x.current - y.current).norm() < 1e-12);
    }
}
