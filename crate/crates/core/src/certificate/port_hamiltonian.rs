//! Port-Hamiltonian form of the electromechanical part of the dynamics.
//!
//! The mechanical torque is split off, leaving the field `X_diss(x; V)` on
//! the state `x = (J·jωξ, L·I)` with Hamiltonian `H = ½J⁻¹‖x₁‖² + ½L⁻¹‖x₂‖²`:
//!
//! ```text
//! X_diss = (𝐉 − 𝐑)∇H + 𝐆u,    y = 𝐆*∇H
//! 𝐉 = [[jω̄J, λ], [−λ, 0]]   𝐑 = diag(K, R)   𝐆 = [[0, 1, 1], [1, 0, 0]]
//! u = (V, −J(ω − ω̄)ωξ, −λRe{I*ξ}ξ)
//! ```

use num_complex::Complex64;

use crate::math::{self, inner, J};
use crate::model::{MachineParams, PhysicalState};

/// Matrices and port variables of the port-Hamiltonian form at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortHamiltonian {
    pub state: [Complex64; 2],
    pub gradient: [Complex64; 2],
    pub interconnection: [[Complex64; 2]; 2],
    pub dissipation: [[f64; 2]; 2],
    pub input_map: [[f64; 3]; 2],
    pub input: [Complex64; 3],
    pub output: [Complex64; 3],
}

impl PortHamiltonian {
    /// Assembles the form at `state` with bus voltage `v` and reference
    /// frequency `omega_bar`.
    pub fn new(state: &PhysicalState, m: &MachineParams, v: Complex64, omega_bar: f64) -> Self {
        let xi = state.rotor_phasor();
        let w = state.omega;
        let gradient = [J * xi * w, state.current];
        let lam = Complex64::new(m.field_flux, 0.0);
        let input_map = [[0.0, 1.0, 1.0], [1.0, 0.0, 0.0]];
        let input = [
            v,
            xi * (-m.inertia * (w - omega_bar) * w),
            xi * (-m.field_flux * inner(state.current, xi)),
        ];
        let mut output = [Complex64::new(0.0, 0.0); 3];
        for (k, y) in output.iter_mut().enumerate() {
            *y = gradient[0] * input_map[0][k] + gradient[1] * input_map[1][k];
        }
        Self {
            state: [gradient[0] * m.inertia, gradient[1] * m.inductance],
            gradient,
            interconnection: [
                [J * (omega_bar * m.inertia), lam],
                [-lam, Complex64::new(0.0, 0.0)],
            ],
            dissipation: [[m.damping, 0.0], [0.0, m.resistance]],
            input_map,
            input,
            output,
        }
    }

    /// `(𝐉 − 𝐑)∇H + 𝐆u`.
    pub fn field(&self) -> [Complex64; 2] {
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..2 {
                *o += (self.interconnection[i][j] - self.dissipation[i][j]) * self.gradient[j];
            }
            for k in 0..3 {
                *o += self.input[k] * self.input_map[i][k];
            }
        }
        out
    }

    /// `H(x)`.
    pub fn hamiltonian(&self, m: &MachineParams) -> f64 {
        0.5 * math::norm_sqr(self.state[0]) / m.inertia
            + 0.5 * math::norm_sqr(self.state[1]) / m.inductance
    }
}

/// `X_diss(x; V) = (J·d/dt(jωξ), L·İ)` with the mechanical torque removed,
/// assembled directly from the machine equations.
pub fn diss_field(state: &PhysicalState, m: &MachineParams, v: Complex64) -> [Complex64; 2] {
    let xi = state.rotor_phasor();
    let w = state.omega;
    let j_domega = -m.damping * w + m.field_flux * inner(state.current, J * xi);
    let dx1 = J * xi * j_domega - xi * (m.inertia * w * w);
    let dx2 = v - J * xi * (m.field_flux * w) - state.current * m.resistance;
    [dx1, dx2]
}

/// `‖X_diss − ((𝐉 − 𝐑)∇H + 𝐆u)‖` at time `t` on the bus `grid`, with
/// `ω̄ = ω_s`.
pub fn ph_consistency(
    state: &PhysicalState,
    m: &MachineParams,
    grid: &crate::model::GridParams,
    t: f64,
) -> f64 {
    let v = crate::model::bus_voltage(t, grid);
    let direct = diss_field(state, m, v);
    let ph = PortHamiltonian::new(state, m, v, grid.frequency).field();
    math::sqrt(math::norm_sqr(direct[0] - ph[0]) + math::norm_sqr(direct[1] - ph[1]))
}

fn inner2(a: [Complex64; 2], b: [Complex64; 2]) -> f64 {
    inner(a[0], b[0]) + inner(a[1], b[1])
}

/// `⟨∇H(x) − ∇H(x̄), X_diss(x; V) − X_diss(x̄; V̄)⟩`, the rate of the
/// shifted Hamiltonian along the dissipative field. `ω̄` is taken from
/// `reference`.
pub fn shifted_energy_rate(
    state: &PhysicalState,
    reference: &PhysicalState,
    m: &MachineParams,
    v: Complex64,
    v_bar: Complex64,
) -> f64 {
    let g = [J * state.rotor_phasor() * state.omega, state.current];
    let gb = [
        J * reference.rotor_phasor() * reference.omega,
        reference.current,
    ];
    let f = diss_field(state, m, v);
    let fb = diss_field(reference, m, v_bar);
    inner2([g[0] - gb[0], g[1] - gb[1]], [f[0] - fb[0], f[1] - fb[1]])
}

/// Right-hand side of the exact shifted energy balance:
///
/// ```text
/// −⟨Δ∇H, 𝐑Δ∇H⟩ + ⟨I − Ī, V − V̄⟩ − ⟨J(ω − ω̄)ωξ, Δ(jωξ)⟩
///   − λ⟨Re{I*ξ}ξ − Re{Ī*ξ̄}ξ̄, Δ(jωξ)⟩
/// ```
pub fn raw_balance_rhs(
    state: &PhysicalState,
    reference: &PhysicalState,
    m: &MachineParams,
    v: Complex64,
    v_bar: Complex64,
) -> f64 {
    let xi = state.rotor_phasor();
    let xb = reference.rotor_phasor();
    let (w, wb) = (state.omega, reference.omega);
    let d_vel = J * xi * w - J * xb * wb;
    let d_cur = state.current - reference.current;
    let dissipated = m.damping * math::norm_sqr(d_vel) + m.resistance * math::norm_sqr(d_cur);
    let coupling = xi * inner(state.current, xi) - xb * inner(reference.current, xb);
    -dissipated + inner(d_cur, v - v_bar)
        - inner(xi * (m.inertia * (w - wb) * w), d_vel)
        - m.field_flux * inner(coupling, d_vel)
}

/// Upper bound on [`raw_balance_rhs`] obtained by bounding the coupling
/// terms; valid for `η ≥ 0`.
pub fn bounded_balance_rhs(
    state: &PhysicalState,
    reference: &PhysicalState,
    m: &MachineParams,
    v: Complex64,
    v_bar: Complex64,
    eta: f64,
) -> f64 {
    let xi = state.rotor_phasor();
    let xb = reference.rotor_phasor();
    let (w, wb) = (state.omega, reference.omega);
    let lam = m.field_flux;
    let d_vel = J * xi * w - J * xb * wb;
    let d_cur = state.current - reference.current;
    let dissipated = m.damping * math::norm_sqr(d_vel) + m.resistance * math::norm_sqr(d_cur);

    let rel = xi * xb.conj();
    let angle = math::norm(rel - 1.0);
    let coef = eta - m.inertia * wb * wb + lam * inner(reference.current, xb);
    // d/dt ⟨ξ, ξ̄⟩ = −(ω − ω̄)⟨ξ, jξ̄⟩
    let d_overlap = -(w - wb) * inner(xi, J * xb);
    let dw = w - wb;

    -dissipated
        + inner(d_cur, v - v_bar)
        + coef * d_overlap
        + eta * math::abs(dw) * angle
        + m.damping * math::norm_sqr(J * rel * w - J * wb)
        - m.damping * wb * w * angle * angle
        - (m.damping - m.inertia * wb) * dw * dw
        + lam * wb * math::norm(d_cur * xb.conj()) * angle
        + lam * wb * math::norm(reference.current) * angle * angle
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{bus_voltage, dynamics_with_voltage};
    use crate::steady_state::solve_steady_states;

    #[test]
    fn zero_state_is_exact() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let s = PhysicalState::new(0.7, 0.0, Complex64::new(0.0, 0.0));
        assert_eq!(ph_consistency(&s, &m, &g, 0.3), 0.0);
    }

    #[test]
    fn steady_state_is_consistent() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let ss = solve_steady_states(&m, &g).unwrap();
        for t in [0.0, 1.3, 17.0] {
            assert!(ph_consistency(&ss[0].state_at(t, &g), &m, &g, t) < 1e-12);
        }
    }

    #[test]
    fn diss_field_matches_full_dynamics_without_torque() {
        let m = fixtures::machine();
        let s = PhysicalState::new(0.4, 1.05, Complex64::new(0.2, -0.3));
        let v = Complex64::new(0.9, 0.1);
        let mut no_torque = m;
        no_torque.mech_torque = 0.0;
        let d = dynamics_with_voltage(&s, &no_torque, v);
        let xi = s.rotor_phasor();
        let x1 = J * xi * (m.inertia * d.domega) + J * J * xi * (m.inertia * s.omega * d.dtheta);
        let f = diss_field(&s, &m, v);
        assert!((f[0] - x1).norm() < 1e-13);
        assert!((f[1] - d.dcurrent * m.inductance).norm() < 1e-13);
    }

    #[test]
    fn raw_balance_is_exact_and_bounded() {
        let m = fixtures::machine();
        let g = fixtures::grid();
        let ss = solve_steady_states(&m, &g).unwrap();
        let t = 0.8;
        let r = ss[0].state_at(t, &g);
        let vb = bus_voltage(t, &g);
        let s = PhysicalState::new(r.theta + 0.3, 1.02, r.current + Complex64::new(0.1, 0.05));
        let v = vb * 1.01;
        let lhs = shifted_energy_rate(&s, &r, &m, v, vb);
        let raw = raw_balance_rhs(&s, &r, &m, v, vb);
        assert!((lhs - raw).abs() < 1e-12 * (1.0 + lhs.abs()));
        assert!(bounded_balance_rhs(&s, &r, &m, v, vb, 0.0) >= raw);
        assert!(bounded_balance_rhs(&s, &r, &m, v, vb, 0.5) >= raw);
    }
}
