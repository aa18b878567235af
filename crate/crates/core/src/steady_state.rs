//! Synchronous steady states: periodic motions with `ω = ω_s`, constant
//! current magnitude and current phase advancing at `ω_s`.
//!
//! With `θ(t) = ω_s t + φ0 + δ` and `I(t) = Ī e^{j(ω_s t + φ0)}` the stator
//! equation becomes linear in `Ī`, so every steady state is a root `δ` of
//! the scalar torque balance
//!
//! ```text
//! g(δ) = Tm - K ω_s - Te(δ),   Ī(δ) = (v - λ j ω_s e^{jδ}) / (R + j ω_s L)
//! ```
//!
//! which is a sinusoid plus a constant. Phasors are reported in the frame of
//! the bus voltage.

use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::math::{self, cis, inner, J};
use crate::model::{terminal_power, GridParams, MachineParams, PhysicalState};

/// Number of uniform cells used to bracket roots of the torque balance.
pub const SCAN_CELLS: usize = 720;
/// Band around `|𝒫| = 1` treated as the tangent (single root) case.
pub const TOL_BOUNDARY: f64 = 1e-9;
/// Refinement passes tried around the smallest `|g|` when the coarse scan
/// misses a pair of nearly coincident roots.
const REFINE_LEVELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteadyStateError {
    #[error(
        "root scan found {found} steady state(s) but the existence indicator predicts {expected}"
    )]
    CountMismatch { expected: usize, found: usize },
}

/// Existence indicator `𝒫` and the implied number of steady states.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExistenceReport {
    pub indicator: f64,
    pub count: usize,
}

/// One synchronous steady state, phasors in the bus frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SteadyState {
    /// Rotor frequency, equal to the bus frequency.
    pub omega: f64,
    /// Rotor phase offset from the bus phase, in `[-π, π)`.
    pub delta: f64,
    /// `ξ̄ = e^{jδ}`.
    pub rotor_phasor: Complex64,
    /// Steady stator current phasor `Ī`.
    pub current: Complex64,
    pub active_power: f64,
    pub reactive_power: f64,
    /// `Re{Ī* ξ̄}`.
    pub in_phase_coupling: f64,
    /// `Re{Ī* j ξ̄}`.
    pub quadrature_coupling: f64,
}

fn stator_impedance(m: &MachineParams, grid: &GridParams) -> Complex64 {
    Complex64::new(m.resistance, grid.frequency * m.inductance)
}

/// Steady current phasor for rotor offset `delta`.
pub fn steady_current(delta: f64, m: &MachineParams, grid: &GridParams) -> Complex64 {
    let emf = J * cis(delta) * (m.field_flux * grid.frequency);
    (Complex64::new(grid.voltage, 0.0) - emf) / stator_impedance(m, grid)
}

/// Torque-balance residual `Tm - K ω_s - Te(δ)`.
pub fn torque_balance(delta: f64, m: &MachineParams, grid: &GridParams) -> f64 {
    let i = steady_current(delta, m, grid);
    let te = -m.field_flux * inner(i, J * cis(delta));
    m.mech_torque - m.damping * grid.frequency - te
}

/// Evaluates the closed-form existence indicator.
pub fn existence_indicator(m: &MachineParams, grid: &GridParams) -> ExistenceReport {
    let w = grid.frequency;
    let z2 = m.inductance * m.inductance * w * w + m.resistance * m.resistance;
    let num =
        -m.field_flux * m.field_flux * w * m.resistance + (m.mech_torque - m.damping * w) * z2;
    let den = m.field_flux * grid.voltage * math::sqrt(z2);
    let indicator = num / den;
    let gap = math::abs(indicator) - 1.0;
    let count = if math::abs(gap) <= TOL_BOUNDARY {
        1
    } else if gap < 0.0 {
        2
    } else {
        0
    };
    ExistenceReport { indicator, count }
}

impl SteadyState {
    /// Builds the full record from a rotor offset.
    pub fn from_offset(delta: f64, m: &MachineParams, grid: &GridParams) -> Self {
        let delta = math::wrap_angle(delta);
        Self::from_phasors(cis(delta), steady_current(delta, m, grid), grid)
    }

    /// Builds the record from given phasors without solving anything, e.g.
    /// to assess published values.
    pub fn from_phasors(rotor_phasor: Complex64, current: Complex64, grid: &GridParams) -> Self {
        let (active_power, reactive_power) =
            terminal_power(current, Complex64::new(grid.voltage, 0.0));
        Self {
            omega: grid.frequency,
            delta: libm::atan2(rotor_phasor.im, rotor_phasor.re),
            rotor_phasor,
            current,
            active_power,
            reactive_power,
            in_phase_coupling: inner(current, rotor_phasor),
            quadrature_coupling: inner(current, J * rotor_phasor),
        }
    }

    /// Physical state on the periodic orbit at time `t`.
    pub fn state_at(&self, t: f64, grid: &GridParams) -> PhysicalState {
        let phase = grid.phase_at(t);
        PhysicalState::new(phase + self.delta, self.omega, self.current * cis(phase))
    }

    /// Co-energy coordinates of the orbit relative to the bus phase; constant
    /// in time.
    pub fn embedded(&self) -> crate::model::EmbeddedState {
        let phasor = cis(self.delta);
        crate::model::EmbeddedState {
            velocity: J * phasor * self.omega,
            phasor,
            current: self.current,
        }
    }
}

fn bisect(mut a: f64, mut ga: f64, mut b: f64, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let gm = f(mid);
        if math::abs(gm) < tol || mid <= a || mid >= b {
            return mid;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Golden-section minimization of `|f|` on `[a, b]`.
fn minimize_abs(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (math::abs(f(c)), math::abs(f(d)));
    for _ in 0..200 {
        if b - a < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = math::abs(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = math::abs(f(d));
        }
    }
    0.5 * (a + b)
}

/// Sign-change roots of `f` on `[lo, hi)` with `cells` uniform cells.
/// Also returns the grid point with the smallest `|f|`.
fn scan(lo: f64, hi: f64, cells: usize, f: &impl Fn(f64) -> f64, tol: f64) -> (Vec<f64>, f64) {
    let width = (hi - lo) / cells as f64;
    let mut roots = Vec::new();
    let mut best = (f64::INFINITY, lo);
    let mut a = lo;
    let mut ga = f(a);
    for k in 1..=cells {
        let b = lo + k as f64 * width;
        let gb = f(b);
        if math::abs(ga) < best.0 {
            best = (math::abs(ga), a);
        }
        if ga == 0.0 {
            roots.push(a);
        } else if ga * gb < 0.0 {
            roots.push(bisect(a, ga, b, f, tol));
        }
        a = b;
        ga = gb;
    }
    (roots, best.1)
}

/// All synchronous steady states, ordered by increasing `δ`.
pub fn solve_steady_states(
    m: &MachineParams,
    grid: &GridParams,
) -> Result<Vec<SteadyState>, SteadyStateError> {
    use core::f64::consts::PI;

    let report = existence_indicator(m, grid);
    let g = |d: f64| torque_balance(d, m, grid);
    let tol = 1e-12 * m.mech_torque.max(m.damping * grid.frequency);
    let cell = 2.0 * PI / SCAN_CELLS as f64;

    let (mut roots, mut best) = scan(-PI, PI, SCAN_CELLS, &g, tol);

    if report.count == 1 {
        // Tangency: g touches zero without changing sign.
        let root = if roots.len() == 1 {
            roots[0]
        } else {
            minimize_abs(best - cell, best + cell, g)
        };
        roots.clear();
        roots.push(root);
    } else {
        let mut width = cell;
        let mut level = 0;
        while roots.len() != report.count && report.count == 2 && level < REFINE_LEVELS {
            // Two roots closer than one cell: rescan around the minimum of |g|.
            let (sub, sub_best) = scan(best - width, best + width, SCAN_CELLS, &g, tol);
            let mut merged: Vec<f64> = roots
                .iter()
                .copied()
                .filter(|r| math::abs(*r - best) > width)
                .collect();
            merged.extend(sub);
            roots = merged;
            best = sub_best;
            width *= 2.0 / SCAN_CELLS as f64;
            level += 1;
        }
    }

    if roots.len() != report.count {
        return Err(SteadyStateError::CountMismatch {
            expected: report.count,
            found: roots.len(),
        });
    }

    let mut out: Vec<SteadyState> = roots
        .into_iter()
        .map(|d| SteadyState::from_offset(d, m, grid))
        .collect();
    out.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    Ok(out)
}

/// Largest violation of the torque balance and the steady stator equation.
pub fn steady_residual(ss: &SteadyState, m: &MachineParams, grid: &GridParams) -> f64 {
    let w = grid.frequency;
    let te = -m.field_flux * inner(ss.current, J * ss.rotor_phasor);
    let torque = math::abs(-m.damping * w + m.mech_torque - te);
    let stator = stator_impedance(m, grid) * ss.current + J * ss.rotor_phasor * (m.field_flux * w)
        - Complex64::new(grid.voltage, 0.0);
    torque.max(math::norm(stator))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reference_machine_has_two_states() {
        let r = existence_indicator(&fixtures::machine(), &fixtures::grid());
        assert_eq!(r.count, 2);
        assert!(r.indicator.abs() < 1.0);
    }

    #[test]
    fn zero_numerator_indicator() {
        let g = fixtures::grid();
        let mut m = fixtures::machine();
        let w = g.frequency;
        let z2 = m.inductance.powi(2) * w * w + m.resistance.powi(2);
        m.mech_torque = m.damping * w + m.field_flux.powi(2) * w * m.resistance / z2;
        let r = existence_indicator(&m, &g);
        assert!(r.indicator.abs() < 1e-12);
        assert_eq!(r.count, 2);
        assert_eq!(solve_steady_states(&m, &g).unwrap().len(), 2);
    }

    #[test]
    fn inflated_torque_has_no_state() {
        let g = fixtures::grid();
        let mut m = fixtures::machine();
        m.mech_torque *= 10.0;
        let r = existence_indicator(&m, &g);
        assert!(r.indicator.abs() > 1.0);
        assert_eq!(r.count, 0);
        // Independent check: the balance never reaches zero on a fine grid.
        let min = (0..100_000)
            .map(|k| -core::f64::consts::PI + k as f64 * 2.0 * core::f64::consts::PI / 1e5)
            .map(|d| torque_balance(d, &m, &g))
            .fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        assert!(solve_steady_states(&m, &g).unwrap().is_empty());
    }

    #[test]
    fn reference_states_match_published_phasors() {
        let (m, g) = (fixtures::machine(), fixtures::grid());
        let ss = solve_steady_states(&m, &g).unwrap();
        assert_eq!(ss.len(), 2);
        let (a, b) = (&ss[0], &ss[1]);
        assert!((a.rotor_phasor - c(0.5920, -0.8060)).norm() < 1e-3);
        assert!((a.current - c(-0.1983, -0.2054)).norm() < 1e-3);
        assert!((b.rotor_phasor - c(0.5757, 0.8177)).norm() < 1e-3);
        assert!((b.current - c(-0.1872, -0.7548)).norm() < 1e-3);
        assert!((a.in_phase_coupling - 0.0482).abs() < 1e-3);
        assert!((b.in_phase_coupling + 0.725).abs() < 1e-3);
        for s in &ss {
            assert!(steady_residual(s, &m, &g) < 1e-8);
            assert!((s.rotor_phasor.norm() - 1.0).abs() < 1e-12);
            assert_eq!(s.omega, g.frequency);
        }
    }

    #[test]
    fn residual_detects_perturbation() {
        let (m, g) = (fixtures::machine(), fixtures::grid());
        let s = solve_steady_states(&m, &g).unwrap()[0];
        let mut bad = s;
        bad.rotor_phasor = cis(s.delta + 0.1);
        assert!(steady_residual(&bad, &m, &g) > 1e-3);
    }

    #[test]
    fn printed_phasors_have_small_residual() {
        let (m, g) = (fixtures::machine(), fixtures::grid());
        let s = SteadyState::from_phasors(c(0.5920, -0.8060), c(-0.1983, -0.2054), &g);
        assert!(steady_residual(&s, &m, &g) < 5e-3);
    }

    #[test]
    fn power_identities() {
        let (m, g) = (fixtures::machine(), fixtures::grid());
        for s in solve_steady_states(&m, &g).unwrap() {
            let w = s.omega;
            let i2 = s.current.norm_sqr();
            let p = -m.field_flux * w * s.quadrature_coupling - m.resistance * i2;
            let q = -m.field_flux * w * s.in_phase_coupling - w * m.inductance * i2;
            assert!((s.active_power - p).abs() < 1e-10);
            assert!((s.reactive_power - q).abs() < 1e-10);
            if s.reactive_power > 0.0 {
                assert!(s.in_phase_coupling < 0.0);
            }
            if s.active_power > 0.0 {
                assert!(s.quadrature_coupling < 0.0);
            }
        }
    }

    #[test]
    fn tangent_case_returns_single_root() {
        let g = fixtures::grid();
        let mut m = fixtures::machine();
        let w = g.frequency;
        let z2 = m.inductance.powi(2) * w * w + m.resistance.powi(2);
        // Choose Tm so that the indicator is exactly 1.
        m.mech_torque = m.damping * w
            + (m.field_flux * g.voltage * z2.sqrt() + m.field_flux.powi(2) * w * m.resistance) / z2;
        let r = existence_indicator(&m, &g);
        assert_eq!(r.count, 1);
        let ss = solve_steady_states(&m, &g).unwrap();
        assert_eq!(ss.len(), 1);
        assert!(torque_balance(ss[0].delta, &m, &g).abs() < 1e-9);
    }

    #[test]
    fn close_roots_are_resolved_by_refinement() {
        let g = fixtures::grid();
        let mut m = fixtures::machine();
        let w = g.frequency;
        let z2 = m.inductance.powi(2) * w * w + m.resistance.powi(2);
        // Indicator 1 - 1e-7: roots about 9e-4 rad apart, inside one coarse cell.
        let p = 1.0 - 1e-7;
        m.mech_torque = m.damping * w
            + (p * m.field_flux * g.voltage * z2.sqrt() + m.field_flux.powi(2) * w * m.resistance)
                / z2;
        assert_eq!(existence_indicator(&m, &g).count, 2);
        let ss = solve_steady_states(&m, &g).unwrap();
        assert_eq!(ss.len(), 2);
        for s in &ss {
            assert!(steady_residual(s, &m, &g) < 1e-8);
        }
    }
}
