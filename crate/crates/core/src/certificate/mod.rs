//! Shifted-passivity stability certificate for a synchronous steady state.
//!
//! The storage function is the shifted machine energy plus a periodic
//! correction in the rotor angle,
//!
//! ```text
//! S = ½J‖jωξ − jω̄ξ̄‖² + ½L‖I − Ī‖² + ½(η − Jω̄² + λRe{Ī*ξ̄})‖ξ − ξ̄‖²
//! ```
//!
//! and along infinite-bus trajectories `Ṡ ≤ −vᵀQ(ω)v` with
//! `v = (|ω − ω̄|, ‖ξ − ξ̄‖, ‖I − Ī‖)`. The certificate checks that `Q` is
//! positive definite near `ω̄` for some `η ≥ 0` and that the storage has a
//! strict minimum at the steady state.
//!
//! In per-unit mode `η` is multiplied by `ω_base` wherever it enters the
//! dissipation estimate (the `K̂` margin and the off-diagonal of `Q`), and
//! is used as given inside the storage and the local condition.

mod balance;
mod hessian;
mod port_hamiltonian;

pub use balance::{
    balance_inequality_check, storage_series, BalanceCheck, BalanceError, MARGIN_REL, TOL_DISS_REL,
};
pub use hessian::{hessian_positive, HessianCheck};
pub use port_hamiltonian::{
    bounded_balance_rhs, diss_field, ph_consistency, raw_balance_rhs, shifted_energy_rate,
    PortHamiltonian,
};

use thiserror::Error;

use crate::math::{self, inner};
use crate::model::{EmbeddedState, MachineParams, UnitSystem, TOL_MANIFOLD};
use crate::steady_state::SteadyState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("state is off the co-energy manifold (violation {violation:e})")]
    ManifoldViolation { violation: f64 },
    #[error("K ω̄² − J ω̄³ = {value} is not positive; the dissipation margin is undefined")]
    DegenerateDenominator { value: f64 },
    #[error("the stability assumption does not hold for η = {eta}")]
    AssumptionViolated { eta: f64 },
    #[error("η must be finite and non-negative (got {eta})")]
    InvalidEta { eta: f64 },
}

/// Storage function `S(s, s̄)` for a given η (unscaled).
pub fn storage(
    s: &EmbeddedState,
    s_bar: &EmbeddedState,
    eta: f64,
    m: &MachineParams,
) -> Result<f64, CertificateError> {
    for x in [s, s_bar] {
        if !x.on_manifold(TOL_MANIFOLD) {
            return Err(CertificateError::ManifoldViolation {
                violation: x.manifold_violation(),
            });
        }
    }
    Ok(storage_unchecked(s, s_bar, eta, m))
}

pub(crate) fn storage_unchecked(
    s: &EmbeddedState,
    s_bar: &EmbeddedState,
    eta: f64,
    m: &MachineParams,
) -> f64 {
    let omega_bar = s_bar.omega();
    let coef =
        eta - m.inertia * omega_bar * omega_bar + m.field_flux * inner(s_bar.current, s_bar.phasor);
    0.5 * m.inertia * math::norm_sqr(s.velocity - s_bar.velocity)
        + 0.5 * m.inductance * math::norm_sqr(s.current - s_bar.current)
        + 0.5 * coef * math::norm_sqr(s.phasor - s_bar.phasor)
}

/// Symmetric 3×3 dissipation matrix `Q(ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QMatrix(pub [[f64; 3]; 3]);

impl QMatrix {
    pub fn symmetric(d: [f64; 3], off12: f64, off23: f64, off13: f64) -> Self {
        Self([
            [d[0], off12, off13],
            [off12, d[1], off23],
            [off13, off23, d[2]],
        ])
    }

    /// `Q(ω)` for the steady state `ss`. `eta_scaled` already carries the
    /// unit-system factor.
    pub fn dissipation(omega: f64, ss: &SteadyState, m: &MachineParams, eta_scaled: f64) -> Self {
        let wb = ss.omega;
        let lam = m.field_flux;
        Self::symmetric(
            [
                m.damping - m.inertia * wb,
                m.damping * wb * omega
                    - lam * wb * math::norm(ss.current)
                    - m.mech_torque * (omega - wb) / 2.0,
                m.resistance,
            ],
            -eta_scaled / 2.0,
            -lam * wb / 2.0,
            0.0,
        )
    }

    /// Cholesky pivots; all positive iff the matrix is positive definite.
    pub fn cholesky_pivots(&self) -> [f64; 3] {
        let a = &self.0;
        let mut l = [[0.0f64; 3]; 3];
        let mut pivots = [0.0f64; 3];
        for i in 0..3 {
            for j in 0..=i {
                let mut s = a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    pivots[i] = s;
                    if !(s > 0.0) {
                        // Later pivots are meaningless once one fails.
                        for p in pivots.iter_mut().skip(i + 1) {
                            *p = f64::NAN;
                        }
                        return pivots;
                    }
                    l[i][i] = math::sqrt(s);
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        pivots
    }

    /// Leading principal minors.
    pub fn leading_minors(&self) -> [f64; 3] {
        let a = &self.0;
        let m1 = a[0][0];
        let m2 = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let m3 = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        [m1, m2, m3]
    }

    /// Positive definiteness via Cholesky; a zero pivot counts as failure.
    pub fn is_positive_definite(&self) -> bool {
        self.cholesky_pivots().iter().all(|p| *p > 0.0)
    }

    pub fn quadratic_form(&self, v: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += v[i] * self.0[i][j] * v[j];
            }
        }
        acc
    }
}

/// Free function form of [`QMatrix::dissipation`].
pub fn q_matrix(omega: f64, ss: &SteadyState, m: &MachineParams, eta_scaled: f64) -> QMatrix {
    QMatrix::dissipation(omega, ss, m, eta_scaled)
}

pub fn is_positive_definite(q: &QMatrix) -> bool {
    q.is_positive_definite()
}

/// Dissipation margin, speed regulation and the three assumption flags.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssumptionCheck {
    /// `K̂`; `-∞` when `Kω̄² − Jω̄³ ≤ 0`.
    pub k_hat: f64,
    /// `c = 1 − Kω̄/Tm`.
    pub speed_regulation: f64,
    /// `K > Jω̄`.
    pub inertia_ok: bool,
    /// `K̂ > 0`.
    pub margin_ok: bool,
    /// `c < 1/2`.
    pub regulation_ok: bool,
}

impl AssumptionCheck {
    pub fn holds(&self) -> bool {
        self.inertia_ok && self.margin_ok && self.regulation_ok
    }
}

/// `K − λ‖Ī‖/ω̄ − λ²/(4R)`: the η-independent part of `K̂`.
fn base_margin(m: &MachineParams, ss: &SteadyState) -> f64 {
    m.damping
        - m.field_flux * math::norm(ss.current) / ss.omega
        - m.field_flux * m.field_flux / (4.0 * m.resistance)
}

/// `Kω̄² − Jω̄³`.
fn inertia_gap(m: &MachineParams, ss: &SteadyState) -> f64 {
    let w = ss.omega;
    m.damping * w * w - m.inertia * w * w * w
}

pub fn check_assumption(
    m: &MachineParams,
    ss: &SteadyState,
    eta: f64,
    units: &UnitSystem,
) -> Result<AssumptionCheck, CertificateError> {
    let gap = inertia_gap(m, ss);
    if !(gap > 0.0) {
        return Err(CertificateError::DegenerateDenominator { value: gap });
    }
    let eta_eff = units.eta_scale() * eta;
    let k_hat = base_margin(m, ss) - eta_eff * eta_eff / (4.0 * gap);
    let c = 1.0 - m.damping * ss.omega / m.mech_torque;
    Ok(AssumptionCheck {
        k_hat,
        speed_regulation: c,
        inertia_ok: m.damping > m.inertia * ss.omega,
        margin_ok: k_hat > 0.0,
        regulation_ok: c < 0.5,
    })
}

/// Same as [`check_assumption`] but folds the degenerate case into a failed
/// check with `K̂ = −∞`.
pub fn assumption_or_degenerate(
    m: &MachineParams,
    ss: &SteadyState,
    eta: f64,
    units: &UnitSystem,
) -> AssumptionCheck {
    check_assumption(m, ss, eta, units).unwrap_or_else(|_| AssumptionCheck {
        k_hat: f64::NEG_INFINITY,
        speed_regulation: 1.0 - m.damping * ss.omega / m.mech_torque,
        inertia_ok: false,
        margin_ok: false,
        regulation_ok: 1.0 - m.damping * ss.omega / m.mech_torque < 0.5,
    })
}

/// Which lower bound on η is imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EtaMode {
    /// `η > −λRe{Ī*ξ̄}`: strict local minimum of the storage.
    Local,
    /// `η > −λRe{Ī*ξ̄} + Jω̄²`: storage positive on the whole manifold.
    RegionOfAttraction,
}

/// Feasible η set `{η ≥ 0 : η > required, K̂(η) > 0}` = `[lower, upper)`
/// (open at `lower` when `required ≥ 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EtaInterval {
    pub mode: EtaMode,
    /// Unclamped lower bound from the positivity condition.
    pub required: f64,
    /// `max(required, 0)`.
    pub lower: f64,
    /// Supremum of η with `K̂ > 0`; `None` when no η ≥ 0 gives `K̂ > 0`.
    pub upper: Option<f64>,
}

impl EtaInterval {
    pub fn is_empty(&self) -> bool {
        match self.upper {
            Some(u) => !(self.lower < u),
            None => true,
        }
    }

    pub fn contains(&self, eta: f64) -> bool {
        match self.upper {
            Some(u) => eta >= 0.0 && eta > self.required && eta < u,
            None => false,
        }
    }

    /// `0` when feasible, otherwise the midpoint.
    pub fn preferred(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else if self.contains(0.0) {
            Some(0.0)
        } else {
            self.upper.map(|u| 0.5 * (self.lower + u))
        }
    }
}

pub fn eta_bounds(
    m: &MachineParams,
    ss: &SteadyState,
    units: &UnitSystem,
    mode: EtaMode,
) -> EtaInterval {
    let mut required = -m.field_flux * ss.in_phase_coupling;
    if mode == EtaMode::RegionOfAttraction {
        required += m.inertia * ss.omega * ss.omega;
    }
    let base = base_margin(m, ss);
    let gap = inertia_gap(m, ss);
    let upper = if base > 0.0 && gap > 0.0 {
        Some(2.0 / units.eta_scale() * math::sqrt(base * gap))
    } else {
        None
    };
    EtaInterval {
        mode,
        required,
        lower: required.max(0.0),
        upper,
    }
}

/// Decay radius `ρ`, `ρ̂ = min(ρ, ω̄)` and the sublevel threshold `Jρ̂²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayRadius {
    pub rho: f64,
    pub rho_hat: f64,
    pub roa_level: f64,
}

pub fn decay_radius(
    m: &MachineParams,
    ss: &SteadyState,
    eta: f64,
    units: &UnitSystem,
) -> Result<DecayRadius, CertificateError> {
    let check = check_assumption(m, ss, eta, units)?;
    if !check.holds() {
        return Err(CertificateError::AssumptionViolated { eta });
    }
    let w = ss.omega;
    let rho = check.k_hat * w * w / (m.damping * w - m.mech_torque / 2.0);
    let rho_hat = rho.min(w);
    Ok(DecayRadius {
        rho,
        rho_hat,
        roa_level: 0.5 * m.inertia * rho_hat * rho_hat,
    })
}

/// Samples `Q(ω)` on `(ω̄ − ρ, ω̄ + 10ρ]` and checks positive definiteness,
/// and that it fails just below `ω̄ − ρ`.
pub fn q_pd_on_halfline(
    m: &MachineParams,
    ss: &SteadyState,
    eta: f64,
    units: &UnitSystem,
    samples: usize,
) -> bool {
    let Ok(radius) = decay_radius(m, ss, eta, units) else {
        return false;
    };
    let rho = radius.rho;
    let eta_eff = units.eta_scale() * eta;
    let lo = ss.omega - rho + 1e-9;
    let hi = ss.omega + 10.0 * rho;
    let n = samples.max(2);
    let inside = (0..n).all(|k| {
        let omega = lo + (hi - lo) * (k as f64) / ((n - 1) as f64);
        QMatrix::dissipation(omega, ss, m, eta_eff).is_positive_definite()
    });
    let below = ss.omega - rho - 1e-6 * rho;
    inside && !QMatrix::dissipation(below, ss, m, eta_eff).is_positive_definite()
}

/// Outcome of the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    /// Locally asymptotically stable.
    CertifiedLocal,
    /// Locally asymptotically stable with a sublevel-set attraction estimate.
    CertifiedROA,
    Inconclusive,
}

impl Verdict {
    pub fn is_certified(self) -> bool {
        !matches!(self, Verdict::Inconclusive)
    }
}

/// Where the η used by a certificate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EtaChoice {
    User,
    RoaInterval,
    LocalInterval,
    /// No interval was feasible; η = 0 is reported.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    pub eta: f64,
    pub eta_choice: EtaChoice,
    pub k_hat: f64,
    pub speed_regulation: f64,
    pub cond_inertia: bool,
    pub cond_khat: bool,
    pub cond_c: bool,
    pub cond_local: bool,
    pub cond_roa: bool,
    pub rho: Option<f64>,
    pub rho_hat: Option<f64>,
    pub roa_level: Option<f64>,
    pub local_interval: EtaInterval,
    pub roa_interval: EtaInterval,
    pub verdict: Verdict,
}

impl Certificate {
    pub fn assumption_holds(&self) -> bool {
        self.cond_inertia && self.cond_khat && self.cond_c
    }
}

/// Evaluates the certificate. With `eta = None` the η is searched: the
/// attraction interval first, then the local one, preferring `η = 0` and
/// otherwise the interval midpoint.
pub fn certify(
    m: &MachineParams,
    ss: &SteadyState,
    units: &UnitSystem,
    eta: Option<f64>,
) -> Result<Certificate, CertificateError> {
    let local_interval = eta_bounds(m, ss, units, EtaMode::Local);
    let roa_interval = eta_bounds(m, ss, units, EtaMode::RegionOfAttraction);

    let (eta, eta_choice) = match eta {
        Some(e) if !(e.is_finite() && e >= 0.0) => {
            return Err(CertificateError::InvalidEta { eta: e })
        }
        Some(e) => (e, EtaChoice::User),
        None => match (roa_interval.preferred(), local_interval.preferred()) {
            (Some(e), _) => (e, EtaChoice::RoaInterval),
            (None, Some(e)) => (e, EtaChoice::LocalInterval),
            (None, None) => (0.0, EtaChoice::Fallback),
        },
    };

    let check = assumption_or_degenerate(m, ss, eta, units);
    let cond_local = eta > local_interval.required;
    let cond_roa = eta > roa_interval.required;
    let radius = decay_radius(m, ss, eta, units).ok();
    let verdict = match (check.holds(), cond_roa, cond_local) {
        (true, true, _) => Verdict::CertifiedROA,
        (true, false, true) => Verdict::CertifiedLocal,
        _ => Verdict::Inconclusive,
    };

    Ok(Certificate {
        eta,
        eta_choice,
        k_hat: check.k_hat,
        speed_regulation: check.speed_regulation,
        cond_inertia: check.inertia_ok,
        cond_khat: check.margin_ok,
        cond_c: check.regulation_ok,
        cond_local,
        cond_roa,
        rho: radius.map(|r| r.rho),
        rho_hat: radius.map(|r| r.rho_hat),
        roa_level: radius.map(|r| r.roa_level),
        local_interval,
        roa_interval,
        verdict,
    })
}

/// Coordinates of a manifold point around a steady state: rotor angle
/// offset `φ`, frequency offset `δω` and current offset `z = Re z + j Im z`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalCoords {
    pub phi: f64,
    pub domega: f64,
    pub re_z: f64,
    pub im_z: f64,
}

impl LocalCoords {
    pub fn to_array(self) -> [f64; 4] {
        [self.phi, self.domega, self.re_z, self.im_z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            phi: a[0],
            domega: a[1],
            re_z: a[2],
            im_z: a[3],
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        Self::from_array(self.to_array().map(|x| x * k))
    }

    /// The manifold point `(j(ω̄+δω)e^{jφ}s̄2, e^{jφ}s̄2, s̄3 + z)`.
    pub fn to_embedded(self, ss: &SteadyState) -> EmbeddedState {
        let sb = ss.embedded();
        let phasor = math::cis(self.phi) * sb.phasor;
        EmbeddedState {
            velocity: math::J * phasor * (ss.omega + self.domega),
            phasor,
            current: sb.current + num_complex::Complex64::new(self.re_z, self.im_z),
        }
    }

    pub fn from_embedded(s: &EmbeddedState, ss: &SteadyState) -> Self {
        let sb = ss.embedded();
        let rel = s.phasor / sb.phasor;
        let z = s.current - sb.current;
        Self {
            phi: libm::atan2(rel.im, rel.re),
            domega: s.omega() - ss.omega,
            re_z: z.re,
            im_z: z.im,
        }
    }

    /// Euclidean orbit distance `√(‖e^{jφ} − 1‖² + δω² + ‖z‖²)`.
    pub fn orbit_distance(&self) -> f64 {
        let a = math::norm_sqr(math::cis(self.phi) - num_complex::Complex64::new(1.0, 0.0));
        math::sqrt(a + self.domega * self.domega + self.re_z * self.re_z + self.im_z * self.im_z)
    }
}

/// Components of `v(s) = (|ω − ω̄|, ‖s2 − s̄2‖, ‖s3 − s̄3‖)`.
pub fn dissipation_vector(s: &EmbeddedState, s_bar: &EmbeddedState) -> [f64; 3] {
    let ratio = |x: &EmbeddedState| x.velocity / x.phasor;
    [
        math::norm(ratio(s) - ratio(s_bar)),
        math::norm(s.phasor - s_bar.phasor),
        math::norm(s.current - s_bar.current),
    ]
}
