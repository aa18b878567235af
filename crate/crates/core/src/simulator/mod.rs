//! Time integration of the machine equations.
//!
//! The state is integrated as `(θ, ω, Re I, Im I) ∈ ℝ⁴`; the rotor phasor
//! is always recomputed from `θ`, so it stays on the unit circle.

mod basin;
mod monitor;

pub use basin::{
    basin_case, basin_draw, basin_sample, local_to_physical, simulate_draw, BasinBox, BasinCase,
    BasinDraw, BasinOptions, BasinReport, SoundnessViolation, CONVERGENCE_THRESHOLD,
};
pub use monitor::{lyapunov_monitor, sublevel_membership, MonitorReport, SEGMENT_POINTS};

use alloc::vec::Vec;

use thiserror::Error;

use crate::certificate::storage_unchecked;
use crate::math;
use crate::model::{
    dynamics_with_voltage, embed, GridParams, MachineParams, PhysicalState, VoltageSource,
};
use crate::steady_state::SteadyState;

/// Adaptive steps below `STEP_UNDERFLOW_REL·duration` abort the run.
pub const STEP_UNDERFLOW_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation options: {0}")]
    InvalidOptions(&'static str),
    #[error("adaptive step {step:e} fell below the underflow limit at t = {time}")]
    StepUnderflow { time: f64, step: f64 },
    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },
    #[error("the certificate does not provide an attraction estimate")]
    CertificateRequired,
}

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4,
    /// Dormand–Prince 5(4) with local error control. The angle error is
    /// controlled in absolute terms.
    Rk45 { rel_tol: f64, abs_tol: f64 },
}

/// Records `S(t)` against a steady state while integrating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageProbe {
    pub reference: SteadyState,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Fixed step for RK4, initial step for RK45.
    pub step: f64,
    pub duration: f64,
    pub t0: f64,
    pub method: Method,
    /// Keep every `record_every`-th step; `0` keeps only the endpoints.
    pub record_every: usize,
    pub storage: Option<StorageProbe>,
}

impl SimOptions {
    pub fn rk4(step: f64, duration: f64) -> Self {
        Self {
            step,
            duration,
            t0: 0.0,
            method: Method::Rk4,
            record_every: 1,
            storage: None,
        }
    }

    pub fn rk45(step: f64, duration: f64, rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            method: Method::Rk45 { rel_tol, abs_tol },
            ..Self::rk4(step, duration)
        }
    }

    pub fn with_storage(mut self, reference: SteadyState, eta: f64) -> Self {
        self.storage = Some(StorageProbe { reference, eta });
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(SimError::InvalidOptions("step must be finite and > 0"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SimError::InvalidOptions("duration must be finite and > 0"));
        }
        if !self.t0.is_finite() {
            return Err(SimError::InvalidOptions("t0 must be finite"));
        }
        if let Method::Rk45 { rel_tol, abs_tol } = self.method {
            if !(rel_tol > 0.0 && abs_tol > 0.0 && rel_tol.is_finite() && abs_tol.is_finite()) {
                return Err(SimError::InvalidOptions(
                    "tolerances must be finite and > 0",
                ));
            }
        }
        Ok(())
    }
}

/// Sampled solution. `storage` is empty unless a probe was requested.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhysicalState>,
    pub storage: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, PhysicalState)> {
        Some((*self.times.last()?, *self.states.last()?))
    }
}

type Vec4 = [f64; 4];

#[inline]
fn axpy(y: &Vec4, a: f64, k: &Vec4) -> Vec4 {
    [
        y[0] + a * k[0],
        y[1] + a * k[1],
        y[2] + a * k[2],
        y[3] + a * k[3],
    ]
}

#[inline]
fn field<V: VoltageSource + ?Sized>(t: f64, y: &Vec4, m: &MachineParams, source: &V) -> Vec4 {
    let d = dynamics_with_voltage(&PhysicalState::from_array(*y), m, source.voltage(t));
    [d.dtheta, d.domega, d.dcurrent.re, d.dcurrent.im]
}

fn rk4_step<V: VoltageSource + ?Sized>(
    t: f64,
    y: &Vec4,
    h: f64,
    m: &MachineParams,
    source: &V,
) -> Vec4 {
    let k1 = field(t, y, m, source);
    let k2 = field(t + 0.5 * h, &axpy(y, 0.5 * h, &k1), m, source);
    let k3 = field(t + 0.5 * h, &axpy(y, 0.5 * h, &k2), m, source);
    let k4 = field(t + h, &axpy(y, h, &k3), m, source);
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

// Dormand–Prince coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step: the fifth-order solution and the error estimate.
fn dp_step<V: VoltageSource + ?Sized>(
    t: f64,
    y: &Vec4,
    h: f64,
    k1: &Vec4,
    m: &MachineParams,
    source: &V,
) -> (Vec4, Vec4, Vec4) {
    let mut k = [[0.0; 4]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..4 {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = field(t + C[s] * h, &ys, m, source);
    }
    let mut y5 = *y;
    let mut err = [0.0; 4];
    for s in 0..7 {
        for i in 0..4 {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    // First-same-as-last: the last stage is the field at the new point.
    (y5, err, k[6])
}

fn error_norm(y: &Vec4, y_new: &Vec4, err: &Vec4, rel: f64, abs: f64) -> f64 {
    let mut e = 0.0f64;
    for i in 0..4 {
        let scale = if i == 0 {
            abs + rel
        } else {
            abs + rel * math::abs(y[i]).max(math::abs(y_new[i]))
        };
        e = e.max(math::abs(err[i]) / scale);
    }
    e
}

/// Drives the integration and hands every accepted step to `visit`.
fn drive<V: VoltageSource + ?Sized>(
    initial: &PhysicalState,
    m: &MachineParams,
    source: &V,
    opts: &SimOptions,
    mut visit: impl FnMut(usize, f64, &Vec4, bool),
) -> Result<(), SimError> {
    opts.validate()?;
    let t_end = opts.t0 + opts.duration;
    let mut y = initial.to_array();
    let mut t = opts.t0;
    if !initial.is_finite() {
        return Err(SimError::NonFinite { time: t });
    }
    visit(0, t, &y, false);

    match opts.method {
        Method::Rk4 => {
            let n = libm::ceil(opts.duration / opts.step * (1.0 - 1e-12)).max(1.0) as usize;
            for k in 1..=n {
                let target = if k == n {
                    t_end
                } else {
                    opts.t0 + k as f64 * opts.step
                };
                y = rk4_step(t, &y, target - t, m, source);
                t = target;
                if !y.iter().all(|x| x.is_finite()) {
                    return Err(SimError::NonFinite { time: t });
                }
                visit(k, t, &y, k == n);
            }
        }
        Method::Rk45 { rel_tol, abs_tol } => {
            let min_step = STEP_UNDERFLOW_REL * opts.duration;
            let mut h = opts.step.min(opts.duration);
            let mut k1 = field(t, &y, m, source);
            let mut k = 0usize;
            loop {
                let last = t + h >= t_end - 1e-14 * math::abs(t_end).max(1.0);
                if last {
                    h = t_end - t;
                }
                let (y_new, err, k_last) = dp_step(t, &y, h, &k1, m, source);
                let e = error_norm(&y, &y_new, &err, rel_tol, abs_tol);
                if e.is_finite() && e <= 1.0 {
                    t = if last { t_end } else { t + h };
                    y = y_new;
                    k1 = k_last;
                    k += 1;
                    if !y.iter().all(|x| x.is_finite()) {
                        return Err(SimError::NonFinite { time: t });
                    }
                    visit(k, t, &y, last);
                    if last {
                        break;
                    }
                    let factor = if e == 0.0 {
                        5.0
                    } else {
                        (0.9 * libm::pow(e, -0.2)).clamp(0.2, 5.0)
                    };
                    h *= factor;
                } else {
                    let factor = if e.is_finite() {
                        (0.9 * libm::pow(e, -0.25)).clamp(0.1, 0.9)
                    } else {
                        0.1
                    };
                    h *= factor;
                }
                if h < min_step {
                    return Err(SimError::StepUnderflow { time: t, step: h });
                }
            }
        }
    }
    Ok(())
}

/// Integrates with an arbitrary terminal voltage. `frame` fixes the bus
/// phase against which the storage probe (if any) is evaluated.
pub fn integrate_with_source<V: VoltageSource + ?Sized>(
    initial: &PhysicalState,
    m: &MachineParams,
    source: &V,
    frame: &GridParams,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    let mut traj = Trajectory::default();
    let probe = opts.storage.map(|p| (p, p.reference.embedded()));
    let stride = opts.record_every;
    drive(initial, m, source, opts, |k, t, y, last| {
        let keep = k == 0 || last || (stride > 0 && k % stride == 0);
        if !keep {
            return;
        }
        let x = PhysicalState::from_array(*y);
        traj.times.push(t);
        traj.states.push(x);
        if let Some((p, sb)) = &probe {
            traj.storage.push(storage_unchecked(
                &embed(&x, frame.phase_at(t)),
                sb,
                p.eta,
                m,
            ));
        }
    })?;
    Ok(traj)
}

/// Integrates the machine against the infinite bus.
pub fn integrate(
    initial: &PhysicalState,
    m: &MachineParams,
    grid: &GridParams,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    integrate_with_source(initial, m, grid, grid, opts)
}

/// Final time and state only, without allocating a record.
pub fn integrate_endpoint(
    initial: &PhysicalState,
    m: &MachineParams,
    grid: &GridParams,
    opts: &SimOptions,
) -> Result<(f64, PhysicalState), SimError> {
    let mut end = (opts.t0, *initial);
    drive(initial, m, grid, opts, |_, t, y, _| {
        end = (t, PhysicalState::from_array(*y));
    })?;
    Ok(end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::steady_state::solve_steady_states;
    use num_complex::Complex64;

    #[test]
    fn steady_state_is_invariant() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let ss = solve_steady_states(&m, &g).unwrap()[0];
        let opts = SimOptions::rk4(1e-3 * g.period(), 10.0 * g.period());
        let traj = integrate(&ss.state_at(0.0, &g), &m, &g, &opts).unwrap();
        let i_bar = ss.current.norm();
        for x in &traj.states {
            assert!((x.current.norm() - i_bar).abs() < 1e-6);
            assert!((x.omega - ss.omega).abs() < 1e-6);
        }
        assert_eq!(traj.times.len(), 10_001);
        assert_eq!(*traj.times.last().unwrap(), 10.0 * g.period());
    }

    #[test]
    fn decoupled_decay_matches_closed_form() {
        let m = MachineParams {
            inertia: 2.0,
            damping: 1.0,
            mech_torque: 0.0,
            inductance: 2.1,
            resistance: 0.3,
            field_flux: 0.0,
        };
        let zero = |_: f64| Complex64::new(0.0, 0.0);
        let init = PhysicalState::new(0.0, 0.5, Complex64::new(1.0, 0.0));
        for opts in [
            SimOptions::rk4(1e-3, 5.0),
            SimOptions::rk45(1e-2, 5.0, 1e-12, 1e-14),
        ] {
            let traj = integrate_with_source(&init, &m, &zero, &fixtures::grid(), &opts).unwrap();
            for (t, x) in traj.times.iter().zip(&traj.states) {
                let i = (-m.resistance / m.inductance * t).exp();
                let w = 0.5 * (-m.damping / m.inertia * t).exp();
                assert!((x.current.re - i).abs() < 1e-8);
                assert!((x.omega - w).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn endpoint_matches_full_record() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let init = PhysicalState::new(0.2, 1.01, Complex64::new(-0.2, -0.2));
        let opts = SimOptions::rk45(1e-2, 30.0, 1e-9, 1e-11);
        let traj = integrate(&init, &m, &g, &opts).unwrap();
        let (t, x) = integrate_endpoint(&init, &m, &g, &opts).unwrap();
        assert_eq!(traj.last().unwrap(), (t, x));
    }

    #[test]
    fn sparse_recording_keeps_endpoints() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let init = PhysicalState::new(0.2, 1.01, Complex64::new(-0.2, -0.2));
        let mut opts = SimOptions::rk4(0.01, 1.005);
        opts.record_every = 0;
        let traj = integrate(&init, &m, &g, &opts).unwrap();
        assert_eq!(traj.times, [0.0, 1.005]);
    }

    #[test]
    fn invalid_options() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let init = PhysicalState::new(0.0, 1.0, Complex64::new(0.0, 0.0));
        assert!(matches!(
            integrate(&init, &m, &g, &SimOptions::rk4(0.0, 1.0)),
            Err(SimError::InvalidOptions(_))
        ));
        let bad = PhysicalState::new(f64::NAN, 1.0, Complex64::new(0.0, 0.0));
        assert!(matches!(
            integrate(&bad, &m, &g, &SimOptions::rk4(0.1, 1.0)),
            Err(SimError::NonFinite { .. })
        ));
    }
}
