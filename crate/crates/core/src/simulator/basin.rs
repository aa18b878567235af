//! Monte Carlo check of the attraction estimate.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{integrate_endpoint, sublevel_membership, SimError, SimOptions};
use crate::certificate::{storage_unchecked, Certificate, LocalCoords, Verdict};
use crate::math::cis;
use crate::model::{embed, GridParams, MachineParams, PhysicalState};
use crate::steady_state::SteadyState;

/// Final orbit distance below which a run counts as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-4;

/// Sampling ranges in local coordinates around the steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BasinBox {
    pub phi: [f64; 2],
    pub domega: [f64; 2],
    pub re_z: [f64; 2],
    pub im_z: [f64; 2],
}

impl BasinBox {
    /// Symmetric box `[-a, a]` in every coordinate.
    pub fn symmetric(phi: f64, domega: f64, z: f64) -> Self {
        Self {
            phi: [-phi, phi],
            domega: [-domega, domega],
            re_z: [-z, z],
            im_z: [-z, z],
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> LocalCoords {
        let mut pick = |r: [f64; 2]| r[0] + (r[1] - r[0]) * rng.random::<f64>();
        LocalCoords {
            phi: pick(self.phi),
            domega: pick(self.domega),
            re_z: pick(self.re_z),
            im_z: pick(self.im_z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinOptions {
    pub samples: usize,
    pub seed: u64,
    /// Integration options; `t0` is the start time of every run.
    pub sim: SimOptions,
    pub threshold: f64,
}

/// Outcome for one sampled initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasinCase {
    pub index: usize,
    pub initial: LocalCoords,
    pub storage: f64,
    pub in_sublevel: bool,
    pub converged: bool,
    /// Orbit distance at the end of the run; infinite if the run failed.
    pub final_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasinReport {
    pub n_samples: usize,
    pub n_in_sublevel: usize,
    pub n_converged_of_in_sublevel: usize,
    pub n_converged_total: usize,
    /// Initial conditions in the sublevel component that did not converge.
    pub failures: Vec<LocalCoords>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{count} initial condition(s) in the certified sublevel set did not converge")]
pub struct SoundnessViolation {
    pub count: usize,
    pub failures: Vec<LocalCoords>,
}

impl BasinReport {
    pub fn from_cases(cases: &[BasinCase]) -> Self {
        let mut r = BasinReport {
            n_samples: cases.len(),
            ..Default::default()
        };
        for c in cases {
            r.n_converged_total += c.converged as usize;
            if c.in_sublevel {
                r.n_in_sublevel += 1;
                if c.converged {
                    r.n_converged_of_in_sublevel += 1;
                } else {
                    r.failures.push(c.initial);
                }
            }
        }
        r
    }

    pub fn soundness(&self) -> Result<(), SoundnessViolation> {
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(SoundnessViolation {
                count: self.failures.len(),
                failures: self.failures.clone(),
            })
        }
    }
}

/// Physical state at time `t` with the given offsets from the orbit.
pub fn local_to_physical(
    local: &LocalCoords,
    ss: &SteadyState,
    grid: &GridParams,
    t: f64,
) -> PhysicalState {
    let phase = grid.phase_at(t);
    PhysicalState::new(
        phase + ss.delta + local.phi,
        ss.omega + local.domega,
        (ss.current + num_complex::Complex64::new(local.re_z, local.im_z)) * cis(phase),
    )
}

/// A sampled initial condition, classified but not yet simulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinDraw {
    pub index: usize,
    pub initial: LocalCoords,
    pub storage: f64,
    pub in_sublevel: bool,
}

/// Draws sample `index` of the seeded stream. The stream of each sample
/// depends only on `(seed, index)`.
pub fn basin_draw(
    index: usize,
    ss: &SteadyState,
    cert: &Certificate,
    m: &MachineParams,
    grid: &GridParams,
    bbox: &BasinBox,
    opts: &BasinOptions,
) -> Result<BasinDraw, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let initial = bbox.draw(&mut rng);
    let t0 = opts.sim.t0;
    let x0 = local_to_physical(&initial, ss, grid, t0);
    Ok(BasinDraw {
        index,
        initial,
        storage: storage_unchecked(&initial.to_embedded(ss), &ss.embedded(), cert.eta, m),
        in_sublevel: sublevel_membership(&x0, t0, ss, cert, m, grid)?,
    })
}

/// Simulates a drawn initial condition over the horizon in `opts.sim`.
pub fn simulate_draw(
    draw: &BasinDraw,
    ss: &SteadyState,
    m: &MachineParams,
    grid: &GridParams,
    opts: &BasinOptions,
) -> BasinCase {
    let mut sim = opts.sim;
    sim.storage = None;
    let x0 = local_to_physical(&draw.initial, ss, grid, sim.t0);
    let final_distance = match integrate_endpoint(&x0, m, grid, &sim) {
        Ok((t, x)) => LocalCoords::from_embedded(&embed(&x, grid.phase_at(t)), ss).orbit_distance(),
        Err(_) => f64::INFINITY,
    };
    BasinCase {
        index: draw.index,
        initial: draw.initial,
        storage: draw.storage,
        in_sublevel: draw.in_sublevel,
        converged: final_distance < opts.threshold,
        final_distance,
    }
}

/// Draws and simulates sample `index`.
pub fn basin_case(
    index: usize,
    ss: &SteadyState,
    cert: &Certificate,
    m: &MachineParams,
    grid: &GridParams,
    bbox: &BasinBox,
    opts: &BasinOptions,
) -> Result<BasinCase, SimError> {
    let draw = basin_draw(index, ss, cert, m, grid, bbox, opts)?;
    Ok(simulate_draw(&draw, ss, m, grid, opts))
}

/// Samples `opts.samples` initial conditions from `bbox`, sequentially.
pub fn basin_sample(
    ss: &SteadyState,
    cert: &Certificate,
    m: &MachineParams,
    grid: &GridParams,
    bbox: &BasinBox,
    opts: &BasinOptions,
) -> Result<BasinReport, SimError> {
    if cert.verdict != Verdict::CertifiedROA {
        return Err(SimError::CertificateRequired);
    }
    let cases = (0..opts.samples)
        .map(|i| basin_case(i, ss, cert, m, grid, bbox, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BasinReport::from_cases(&cases))
}
