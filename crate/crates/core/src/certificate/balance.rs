//! Numerical check of `Ṡ ≤ −vᵀQ(ω)v` along a simulated infinite-bus
//! trajectory.

use alloc::vec::Vec;

use thiserror::Error;

use super::{decay_radius, dissipation_vector, storage_unchecked, CertificateError, QMatrix};
use crate::math;
use crate::model::{embed, GridParams, MachineParams, UnitSystem};
use crate::simulator::Trajectory;
use crate::steady_state::SteadyState;

/// Relative part of the tolerance, applied to `max vᵀQv` over the record.
pub const TOL_DISS_REL: f64 = 1e-6;
/// Region margin as a fraction of `ρ`.
pub const MARGIN_REL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error("sample {index} at t = {time} has ω = {omega}, outside ω > {bound}")]
    OutOfRegion {
        index: usize,
        time: f64,
        omega: f64,
        bound: f64,
    },
    #[error("trajectory needs at least four samples (got {len})")]
    TooShort { len: usize },
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalanceCheck {
    /// `max (dS/dt + vᵀQv)` over interior samples.
    pub max_violation: f64,
    /// Time at which the maximum is attained.
    pub worst_time: f64,
    /// `max vᵀQv` over the record.
    pub scale: f64,
    /// Finite-difference allowance `2·max h₁h₂|S'''|/6`, plus rounding.
    pub discretization: f64,
    /// `TOL_DISS_REL·scale + discretization`.
    pub tolerance: f64,
    pub passed: bool,
}

/// Storage along a trajectory, measured against the steady-state orbit.
pub fn storage_series(
    traj: &Trajectory,
    ss: &SteadyState,
    eta: f64,
    m: &MachineParams,
    grid: &GridParams,
) -> Vec<f64> {
    let sb = ss.embedded();
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, x)| storage_unchecked(&embed(x, grid.phase_at(*t)), &sb, eta, m))
        .collect()
}

/// Third divided difference `f[t₀, t₁, t₂, t₃]`.
fn divided_difference(t: &[f64], s: &[f64]) -> f64 {
    let mut d = [s[0], s[1], s[2], s[3]];
    for level in 1..4 {
        for i in (level..4).rev() {
            d[i] = (d[i] - d[i - 1]) / (t[i] - t[i - level]);
        }
    }
    d[3]
}

/// Three-point derivative on a possibly non-uniform grid.
fn central_derivative(t: [f64; 3], s: [f64; 3]) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    -h2 / (h1 * (h1 + h2)) * s[0] + (h2 - h1) / (h1 * h2) * s[1] + h1 / (h2 * (h1 + h2)) * s[2]
}

/// Compares the central-difference `dS/dt` with `−vᵀQ(ω)v` at every
/// interior sample. The trajectory must have been produced with the bus
/// voltage as input and must stay in `ω > ω̄ − ρ + 10⁻³ρ`.
pub fn balance_inequality_check(
    traj: &Trajectory,
    ss: &SteadyState,
    eta: f64,
    m: &MachineParams,
    grid: &GridParams,
    units: &UnitSystem,
) -> Result<BalanceCheck, BalanceError> {
    let n = traj.times.len();
    if n < 4 || traj.states.len() != n {
        return Err(BalanceError::TooShort {
            len: n.min(traj.states.len()),
        });
    }
    let radius = decay_radius(m, ss, eta, units)?;
    let bound = ss.omega - radius.rho + MARGIN_REL * radius.rho;
    for (index, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        if !(x.omega > bound) {
            return Err(BalanceError::OutOfRegion {
                index,
                time: *t,
                omega: x.omega,
                bound,
            });
        }
    }

    let s = storage_series(traj, ss, eta, m, grid);
    let sb = ss.embedded();
    let eta_eff = units.eta_scale() * eta;

    let mut scale = 0.0f64;
    let mut rates = Vec::with_capacity(n);
    for k in 0..n {
        let e = embed(&traj.states[k], grid.phase_at(traj.times[k]));
        let v = dissipation_vector(&e, &sb);
        let q = QMatrix::dissipation(traj.states[k].omega, ss, m, eta_eff).quadratic_form(v);
        scale = scale.max(math::abs(q));
        rates.push(q);
    }

    // Truncation error of the three-point formula is h₁h₂|S'''|/6, with the
    // third derivative taken from divided differences of the record.
    let mut h_min = f64::INFINITY;
    for k in 1..n {
        h_min = h_min.min(traj.times[k] - traj.times[k - 1]);
    }
    let mut truncation = 0.0f64;
    for k in 1..n - 1 {
        let lo = (k - 1).min(n - 4);
        let d3 = 6.0 * divided_difference(&traj.times[lo..lo + 4], &s[lo..lo + 4]);
        let h1 = traj.times[k] - traj.times[k - 1];
        let h2 = traj.times[k + 1] - traj.times[k];
        truncation = truncation.max(h1 * h2 * math::abs(d3) / 6.0);
    }
    let s_max = s.iter().fold(0.0f64, |a, b| a.max(math::abs(*b)));
    let discretization = 2.0 * truncation + 64.0 * f64::EPSILON * s_max / h_min;

    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_time = traj.times[0];
    for k in 1..n - 1 {
        let ds = central_derivative(
            [traj.times[k - 1], traj.times[k], traj.times[k + 1]],
            [s[k - 1], s[k], s[k + 1]],
        );
        let gap = ds + rates[k];
        if gap > max_violation {
            max_violation = gap;
            worst_time = traj.times[k];
        }
    }
    let tolerance = TOL_DISS_REL * scale + discretization;
    Ok(BalanceCheck {
        max_violation,
        worst_time,
        scale,
        discretization,
        tolerance,
        passed: max_violation <= tolerance,
    })
}
