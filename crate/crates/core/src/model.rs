//! The SMIB model in the stationary αβ frame.
//!
//! Balanced three-phase quantities are complex space vectors and rotation is
//! counterclockwise (Clarke convention). The machine obeys
//!
//! ```text
//! J ω' = -K ω + Tm - Te          θ' = ω
//! L I' = -R I - E + V
//! Te   = -λ Re{I* j e^{jθ}}      E  = λ j ω e^{jθ}
//! ```
//!
//! with the stator current `I` oriented into the machine. In per-unit mode
//! the same equations are used with normalized quantities; the base
//! frequency only enters the certificate's η scaling.

use core::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::math::{self, cis, inner, J};

/// Relative tolerance used to decide membership of the co-energy manifold.
pub const TOL_MANIFOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("`{name}` must be finite and > 0 (got {value})")]
    NotPositive { name: &'static str, value: f64 },
    #[error("`{name}` must be finite (got {value})")]
    NotFinite { name: &'static str, value: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

fn finite(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NotFinite { name, value })
    }
}

/// Physical constants of the machine.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MachineParams {
    /// Rotor inertia `J`.
    pub inertia: f64,
    /// Frequency droop / damping coefficient `K`.
    pub damping: f64,
    /// Mechanical input torque `Tm`.
    pub mech_torque: f64,
    /// Stator inductance `L`.
    pub inductance: f64,
    /// Stator resistance `R`.
    pub resistance: f64,
    /// Field flux magnitude `λ`.
    pub field_flux: f64,
}

impl MachineParams {
    pub fn new(
        inertia: f64,
        damping: f64,
        mech_torque: f64,
        inductance: f64,
        resistance: f64,
        field_flux: f64,
    ) -> Result<Self, ParamError> {
        let m = Self {
            inertia,
            damping,
            mech_torque,
            inductance,
            resistance,
            field_flux,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        positive("inertia", self.inertia)?;
        positive("damping", self.damping)?;
        positive("mech_torque", self.mech_torque)?;
        positive("inductance", self.inductance)?;
        positive("resistance", self.resistance)?;
        positive("field_flux", self.field_flux)
    }
}

/// The infinite bus: `V(t) = v_mag · e^{j(ω_s t + φ0)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GridParams {
    /// Bus angular frequency `ω_s`.
    pub frequency: f64,
    /// Space-vector magnitude of the bus voltage (`√3·V_s` in SI).
    pub voltage: f64,
    /// Bus phase at `t = 0` in radians.
    #[cfg_attr(feature = "serde", serde(default))]
    pub phase0: f64,
}

impl GridParams {
    pub fn new(frequency: f64, voltage: f64, phase0: f64) -> Result<Self, ParamError> {
        let g = Self {
            frequency,
            voltage,
            phase0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        positive("frequency", self.frequency)?;
        positive("voltage", self.voltage)?;
        finite("phase0", self.phase0)
    }

    /// Bus phase `ω_s t + φ0`.
    #[inline]
    pub fn phase_at(&self, t: f64) -> f64 {
        self.frequency * t + self.phase0
    }

    /// Duration of one bus cycle, `2π/ω_s`.
    #[inline]
    pub fn period(&self) -> f64 {
        core::f64::consts::TAU / self.frequency
    }
}

/// Supplies the terminal voltage seen by the machine.
pub trait VoltageSource {
    fn voltage(&self, t: f64) -> Complex64;
}

impl VoltageSource for GridParams {
    #[inline]
    fn voltage(&self, t: f64) -> Complex64 {
        bus_voltage(t, self)
    }
}

impl<F: Fn(f64) -> Complex64> VoltageSource for F {
    #[inline]
    fn voltage(&self, t: f64) -> Complex64 {
        self(t)
    }
}

/// Unit system of the parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum UnitSystem {
    Si,
    /// Per-unit quantities with time normalized by `omega_base` (rad/s).
    PerUnit {
        omega_base: f64,
    },
}

impl UnitSystem {
    pub fn validate(&self) -> Result<(), ParamError> {
        match *self {
            UnitSystem::Si => Ok(()),
            UnitSystem::PerUnit { omega_base } => positive("omega_base", omega_base),
        }
    }

    /// Factor applied to η wherever it enters the dissipation estimate.
    #[inline]
    pub fn eta_scale(&self) -> f64 {
        match *self {
            UnitSystem::Si => 1.0,
            UnitSystem::PerUnit { omega_base } => omega_base,
        }
    }
}

impl fmt::Display for UnitSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitSystem::Si => f.write_str("SI"),
            UnitSystem::PerUnit { omega_base } => write!(f, "per-unit (ω_base = {omega_base})"),
        }
    }
}

/// Rotor angle, rotor frequency and stator current.
///
/// The angle is kept unwrapped; only `e^{jθ}` enters the certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhysicalState {
    pub theta: f64,
    pub omega: f64,
    pub current: Complex64,
}

impl PhysicalState {
    pub fn new(theta: f64, omega: f64, current: Complex64) -> Self {
        Self {
            theta,
            omega,
            current,
        }
    }

    /// Rotor phasor `ξ = e^{jθ}`.
    #[inline]
    pub fn rotor_phasor(&self) -> Complex64 {
        cis(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite()
            && self.omega.is_finite()
            && self.current.re.is_finite()
            && self.current.im.is_finite()
    }

    pub(crate) fn to_array(self) -> [f64; 4] {
        [self.theta, self.omega, self.current.re, self.current.im]
    }

    pub(crate) fn from_array(y: [f64; 4]) -> Self {
        Self::new(y[0], y[1], Complex64::new(y[2], y[3]))
    }
}

/// Co-energy coordinates `(jωξ, ξ, I)` expressed relative to a reference
/// phasor.
///
/// Built only through [`embed`], which derives the first component from the
/// second, so values produced here lie on the manifold
/// `{‖s2‖ = 1, s1/(j s2) ∈ ℝ}` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmbeddedState {
    pub velocity: Complex64,
    pub phasor: Complex64,
    pub current: Complex64,
}

impl EmbeddedState {
    /// Rotor frequency recovered as `Re{s1 / (j s2)}`.
    pub fn omega(&self) -> f64 {
        (self.velocity / (J * self.phasor)).re
    }

    /// Largest relative violation of the manifold constraints.
    pub fn manifold_violation(&self) -> f64 {
        let unit = math::abs(math::norm(self.phasor) - 1.0);
        let ratio = self.velocity / (J * self.phasor);
        let real = math::abs(ratio.im) / math::abs(ratio.re).max(1.0);
        unit.max(real)
    }

    pub fn on_manifold(&self, tol: f64) -> bool {
        let v = self.manifold_violation();
        v.is_finite() && v <= tol
    }
}

/// Time derivative of a [`PhysicalState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dtheta: f64,
    pub domega: f64,
    pub dcurrent: Complex64,
}

/// Bus voltage `v_mag · e^{j(ω_s t + φ0)}`.
#[inline]
pub fn bus_voltage(t: f64, grid: &GridParams) -> Complex64 {
    cis(grid.phase_at(t)) * grid.voltage
}

/// Electrical torque `Te = -λ Re{I* j e^{jθ}}`.
#[inline]
pub fn electrical_torque(state: &PhysicalState, m: &MachineParams) -> f64 {
    -m.field_flux * inner(state.current, J * state.rotor_phasor())
}

/// Electromotive force `E = λ j ω e^{jθ}`.
#[inline]
pub fn emf(state: &PhysicalState, m: &MachineParams) -> Complex64 {
    J * state.rotor_phasor() * (m.field_flux * state.omega)
}

/// Right-hand side of the swing and stator equations for a given terminal
/// voltage.
pub fn dynamics_with_voltage(
    state: &PhysicalState,
    m: &MachineParams,
    v: Complex64,
) -> StateDerivative {
    let xi = state.rotor_phasor();
    let jxi = J * xi;
    let torque = -m.field_flux * inner(state.current, jxi);
    let e = jxi * (m.field_flux * state.omega);
    StateDerivative {
        dtheta: state.omega,
        domega: (-m.damping * state.omega + m.mech_torque - torque) / m.inertia,
        dcurrent: (v - e - state.current * m.resistance) / m.inductance,
    }
}

/// Right-hand side with the infinite bus as the terminal voltage.
#[inline]
pub fn dynamics_rhs(
    t: f64,
    state: &PhysicalState,
    m: &MachineParams,
    grid: &GridParams,
) -> StateDerivative {
    dynamics_with_voltage(state, m, bus_voltage(t, grid))
}

/// Terminal power output `(P, Q) = (-Re{I* V}, -Im{I* V})`.
#[inline]
pub fn terminal_power(current: Complex64, voltage: Complex64) -> (f64, f64) {
    let s = current.conj() * voltage;
    (-s.re, -s.im)
}

/// Embeds a physical state into co-energy coordinates relative to
/// `e^{j·reference_phase}`.
pub fn embed(state: &PhysicalState, reference_phase: f64) -> EmbeddedState {
    let rel = math::wrap_angle(math::wrap_angle(state.theta) - math::wrap_angle(reference_phase));
    let phasor = cis(rel);
    EmbeddedState {
        velocity: J * phasor * state.omega,
        phasor,
        current: state.current * cis(-reference_phase),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use core::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bus_voltage_examples() {
        let g = GridParams::new(2.0, 1.0, 0.0).unwrap();
        assert!((bus_voltage(0.0, &g) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((bus_voltage(PI / 2.0, &g) - c(-1.0, 0.0)).norm() < 1e-15);
        let g = fixtures::grid();
        let expect = c((PI / 4.0).cos(), (PI / 4.0).sin());
        assert!((bus_voltage(PI / 4.0, &g) - expect).norm() < 1e-15);
    }

    #[test]
    fn torque_and_emf_examples() {
        let m = MachineParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = PhysicalState::new(0.7, 1.3, c(0.0, 0.0));
        assert_eq!(electrical_torque(&s, &m), 0.0);
        let s = PhysicalState::new(0.0, 1.0, c(1.0, 0.0));
        assert_eq!(electrical_torque(&s, &m), 0.0);
        assert_eq!(emf(&s, &m), c(0.0, 1.0));
        let s = PhysicalState::new(0.4, 0.0, c(0.3, 0.1));
        assert_eq!(emf(&s, &m), c(0.0, 0.0));
    }

    #[test]
    fn printed_operating_point_torque() {
        // Steady state 1 of the reference generator, values to 4 digits.
        let m = fixtures::machine();
        let xi = c(0.5920, -0.8060);
        let s = PhysicalState::new(xi.arg(), 1.0, c(-0.1983, -0.2054));
        assert!((electrical_torque(&s, &m) * 1.0 - 0.2).abs() < 5e-3);
        assert!((emf(&s, &m).norm() - 0.7107).abs() < 1e-3);
    }

    #[test]
    fn decoupled_rhs() {
        let m = MachineParams {
            inertia: 2.0,
            damping: 1.0,
            mech_torque: 3.0,
            inductance: 4.0,
            resistance: 0.5,
            field_flux: 0.0,
        };
        let s = PhysicalState::new(0.3, 0.0, c(1.0, 0.0));
        let d = dynamics_with_voltage(&s, &m, c(0.0, 0.0));
        assert_eq!(d.dtheta, 0.0);
        assert_eq!(d.domega, 3.0 / 2.0);
        assert_eq!(d.dcurrent, c(-0.5 / 4.0, 0.0));
    }

    #[test]
    fn rhs_matches_hand_substitution() {
        // Direct substitution, written out component by component.
        let m = fixtures::machine();
        let g = fixtures::grid();
        let (theta, omega, i) = (0.3_f64, 1.01_f64, c(0.1, -0.2));
        let d = dynamics_rhs(0.0, &PhysicalState::new(theta, omega, i), &m, &g);
        let (ct, st) = (theta.cos(), theta.sin());
        // Re{I* j ξ} = Re{(a - jb)(-sin + j cos)} = -a sin + b cos
        let te = -m.field_flux * (-i.re * st + i.im * ct);
        let domega = (-m.damping * omega + m.mech_torque - te) / m.inertia;
        let e = c(-m.field_flux * omega * st, m.field_flux * omega * ct);
        let di = (c(1.0, 0.0) - e - i * m.resistance) / m.inductance;
        assert_eq!(d.dtheta, omega);
        assert!((d.domega - domega).abs() < 1e-13);
        assert!((d.dcurrent - di).norm() < 1e-14);
    }

    #[test]
    fn terminal_power_examples() {
        assert_eq!(terminal_power(c(0.0, 0.0), c(1.0, 0.0)), (0.0, 0.0));
        let (p, q) = terminal_power(c(-1.0, 0.0), c(1.0, 0.0));
        assert_eq!(p, 1.0);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn embed_examples() {
        let s = embed(&PhysicalState::new(0.8, 1.0, c(0.0, 0.0)), 0.8);
        assert_eq!(s.velocity, c(0.0, 1.0));
        assert_eq!(s.phasor, c(1.0, 0.0));
        assert_eq!(s.current, c(0.0, 0.0));

        let a = embed(&PhysicalState::new(0.8, 1.2, c(0.3, -0.1)), 0.1);
        let b = embed(&PhysicalState::new(0.8 + 2.0 * PI, 1.2, c(0.3, -0.1)), 0.1);
        assert!((a.phasor - b.phasor).norm() < 1e-12);
        assert!((a.velocity - b.velocity).norm() < 1e-12);
        assert!(a.on_manifold(TOL_MANIFOLD));
    }

    #[test]
    fn parameter_validation() {
        assert_eq!(
            MachineParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1.0),
            Err(ParamError::NotPositive {
                name: "resistance",
                value: 0.0
            })
        );
        assert!(GridParams::new(1.0, f64::NAN, 0.0).is_err());
        assert!(UnitSystem::PerUnit { omega_base: -1.0 }.validate().is_err());
    }
}
