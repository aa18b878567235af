//! Lyapunov monitoring along a trajectory and sublevel-set membership.

use alloc::vec::Vec;

use super::{SimError, Trajectory};
use crate::certificate::{
    balance_inequality_check, storage_series, storage_unchecked, BalanceCheck, BalanceError,
    Certificate, LocalCoords, Verdict, MARGIN_REL,
};
use crate::math;
use crate::model::{embed, GridParams, MachineParams, PhysicalState, UnitSystem};
use crate::steady_state::SteadyState;

/// Relative part of the monotonicity tolerance, applied to `S(0)`.
pub const TOL_MONO_REL: f64 = 1e-8;
/// Sample points on the segment used to test connectivity.
pub const SEGMENT_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    /// `S` never increased by more than `tolerance` between consecutive
    /// in-region samples.
    pub monotone: bool,
    /// Largest increase `S(t_{k+1}) − S(t_k)` seen in the region.
    pub max_increase: f64,
    /// `TOL_MONO_REL·S(0)` plus rounding and resolution allowances.
    pub tolerance: f64,
    pub initial_storage: f64,
    pub final_storage: f64,
    /// First time the trajectory left `ω > ω̄ − ρ + 10⁻³ρ`.
    pub first_exit: Option<f64>,
    pub balance: Result<BalanceCheck, BalanceError>,
}

impl MonitorReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.first_exit.is_none() && self.balance.as_ref().is_ok_and(|b| b.passed)
    }
}

/// Size of the terms that cancel in `S` near the orbit; `ε` times this is
/// the resolution of the storage.
fn storage_scale(ss: &SteadyState, eta: f64, m: &MachineParams) -> f64 {
    m.inertia * ss.omega * ss.omega
        + m.inductance * ss.current.norm_sqr()
        + math::abs(eta)
        + math::abs(m.field_flux * ss.in_phase_coupling)
}

/// Checks that the storage decreases along `traj` while the trajectory is
/// in the region where `Q(ω)` is positive definite.
///
/// Uses the recorded storage when present and recomputes it otherwise.
/// Without a decay radius (uncertified η) the region is the whole line.
pub fn lyapunov_monitor(
    traj: &Trajectory,
    ss: &SteadyState,
    cert: &Certificate,
    m: &MachineParams,
    grid: &GridParams,
    units: &UnitSystem,
) -> MonitorReport {
    let s: Vec<f64> = if traj.storage.len() == traj.len() && !traj.is_empty() {
        traj.storage.clone()
    } else {
        storage_series(traj, ss, cert.eta, m, grid)
    };
    let bound = cert
        .rho
        .map(|rho| ss.omega - rho + MARGIN_REL * rho)
        .unwrap_or(f64::NEG_INFINITY);

    let initial_storage = s.first().copied().unwrap_or(0.0);
    let s_max = s.iter().fold(0.0f64, |a, b| a.max(math::abs(*b)));
    let tolerance = TOL_MONO_REL * math::abs(initial_storage)
        + 64.0 * f64::EPSILON * s_max
        + f64::EPSILON * storage_scale(ss, cert.eta, m);

    let mut max_increase = f64::NEG_INFINITY;
    let mut first_exit = None;
    for k in 0..traj.len() {
        if !(traj.states[k].omega > bound) {
            first_exit.get_or_insert(traj.times[k]);
            continue;
        }
        if k + 1 < traj.len() && traj.states[k + 1].omega > bound {
            max_increase = max_increase.max(s[k + 1] - s[k]);
        }
    }

    MonitorReport {
        monotone: !(max_increase > tolerance),
        max_increase,
        tolerance,
        initial_storage,
        final_storage: s.last().copied().unwrap_or(0.0),
        first_exit,
        balance: balance_inequality_check(traj, ss, cert.eta, m, grid, units),
    }
}

/// Whether `state` at time `t` lies in the certified sublevel component.
///
/// The component is under-approximated: the storage must stay below the
/// level at `SEGMENT_POINTS` points of the straight segment in local
/// coordinates from the state to the steady state.
pub fn sublevel_membership(
    state: &PhysicalState,
    t: f64,
    ss: &SteadyState,
    cert: &Certificate,
    m: &MachineParams,
    grid: &GridParams,
) -> Result<bool, SimError> {
    let level = match (cert.verdict, cert.roa_level) {
        (Verdict::CertifiedROA, Some(level)) => level,
        _ => return Err(SimError::CertificateRequired),
    };
    let sb = ss.embedded();
    let local = LocalCoords::from_embedded(&embed(state, grid.phase_at(t)), ss);
    let n = SEGMENT_POINTS;
    Ok((0..n).all(|k| {
        let frac = 1.0 - k as f64 / (n - 1) as f64;
        let p = local.scaled(frac).to_embedded(ss);
        storage_unchecked(&p, &sb, cert.eta, m) < level
    }))
}
