//! Algebraic identities behind the certificate, checked on seeded random
//! draws.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smib_core::certificate::{
    bounded_balance_rhs, check_assumption, decay_radius, ph_consistency, q_matrix, raw_balance_rhs,
    shifted_energy_rate, storage, PortHamiltonian,
};
use smib_core::model::{bus_voltage, dynamics_rhs, embed};
use smib_core::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_machine(r: &mut impl Rng) -> MachineParams {
    MachineParams::new(
        r.random_range(0.05..5.0),
        r.random_range(1.0..30.0),
        r.random_range(0.5..40.0),
        r.random_range(0.1..3.0),
        r.random_range(0.005..0.5),
        r.random_range(0.1..2.0),
    )
    .unwrap()
}

fn random_grid(r: &mut impl Rng) -> GridParams {
    GridParams::new(
        r.random_range(0.5..2.0),
        r.random_range(0.5..1.5),
        r.random_range(-PI..PI),
    )
    .unwrap()
}

fn random_state(r: &mut impl Rng) -> PhysicalState {
    PhysicalState::new(
        r.random_range(-30.0..30.0),
        r.random_range(-3.0..3.0),
        Complex::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)),
    )
}

fn inner(a: Complex, b: Complex) -> f64 {
    (a.conj() * b).re
}

/// A random machine with the mechanical torque chosen so that a random
/// rotor offset is a steady state.
fn random_case(r: &mut impl Rng) -> Option<(MachineParams, GridParams, SteadyState)> {
    let mut m = random_machine(r);
    let g = random_grid(r);
    let ss = SteadyState::from_offset(r.random_range(-PI..PI), &m, &g);
    m.mech_torque = m.damping * ss.omega - m.field_flux * ss.quadrature_coupling;
    (m.mech_torque > 0.0).then_some((m, g, ss))
}

#[test]
fn port_hamiltonian_form_matches_direct_field() {
    let mut r = rng(1);
    let m = fixtures::machine();
    let g = fixtures::grid();
    for _ in 0..1000 {
        let s = random_state(&mut r);
        let t = r.random_range(0.0..100.0);
        let scale = 1.0 + s.omega * s.omega + s.current.norm_sqr();
        assert!(ph_consistency(&s, &m, &g, t) < 1e-10 * scale);
    }
    let s = PhysicalState::new(0.4, 0.0, Complex::new(0.0, 0.0));
    assert_eq!(ph_consistency(&s, &m, &g, 2.0), 0.0);
}

#[test]
fn port_hamiltonian_output_is_collocated() {
    let m = fixtures::machine();
    let s = PhysicalState::new(0.3, 1.1, Complex::new(0.2, -0.5));
    let ph = PortHamiltonian::new(&s, &m, Complex::new(1.0, 0.0), 1.0);
    assert_eq!(ph.output[0], s.current);
    assert_eq!(ph.output[1], ph.gradient[0]);
    assert_eq!(ph.output[2], ph.gradient[0]);
    // The interconnection is skew in the real inner product.
    let skew = inner(ph.gradient[0], ph.interconnection[0][0] * ph.gradient[0])
        + inner(ph.gradient[0], ph.interconnection[0][1] * ph.gradient[1])
        + inner(ph.gradient[1], ph.interconnection[1][0] * ph.gradient[0]);
    assert!(skew.abs() < 1e-14);
    let h = ph.hamiltonian(&m);
    assert!((h - 0.5 * m.inertia * 1.21 - 0.5 * m.inductance * s.current.norm_sqr()).abs() < 1e-14);
}

#[test]
fn frequency_identity() {
    let mut r = rng(2);
    for _ in 0..10_000 {
        let (w, wb) = (r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let xi = Complex::from_polar(1.0, r.random_range(-PI..PI));
        let xb = Complex::from_polar(1.0, r.random_range(-PI..PI));
        let j = Complex::i();
        let rhs = (j * w * xi - j * wb * xb).norm_sqr() - w * wb * (xi - xb).norm_sqr();
        let scale = 1.0 + w * w + wb * wb;
        assert!(((w - wb).powi(2) - rhs).abs() < 1e-12 * scale);
    }
}

#[test]
fn angle_distance_identity() {
    let mut r = rng(3);
    for _ in 0..10_000 {
        let (a, b) = (r.random_range(-50.0..50.0), r.random_range(-50.0..50.0));
        let d = (Complex::from_polar(1.0, a) - Complex::from_polar(1.0, b)).norm_sqr();
        assert!((d - (2.0 - 2.0 * (a - b).cos())).abs() < 1e-12);
    }
}

#[test]
fn storage_forms_agree() {
    let mut r = rng(4);
    let mut checked = 0;
    while checked < 10_000 {
        let Some((m, g, ss)) = random_case(&mut r) else {
            continue;
        };
        let eta = r.random_range(0.0..2.0);
        let t = r.random_range(0.0..20.0);
        let x = random_state(&mut r);
        let s = embed(&x, g.phase_at(t));
        let sb = ss.embedded();
        let direct = storage(&s, &sb, eta, &m).unwrap();

        let j = Complex::i();
        let (w, wb) = (x.omega, ss.omega);
        let (xi, xb) = (s.phasor, sb.phasor);
        let di = s.current - sb.current;
        let coef = eta - m.inertia * wb * wb + m.field_flux * ss.in_phase_coupling;
        let shifted_h = 0.5 * m.inertia * (j * w * xi - j * wb * xb).norm_sqr()
            + 0.5 * m.inductance * di.norm_sqr();
        let form2 = shifted_h - coef * (inner(xi, xb) - 1.0);
        let a2 = (xi - xb).norm_sqr();
        let form3 = 0.5 * m.inertia * wb * (w - wb) * a2
            + 0.5 * m.inertia * (w - wb).powi(2)
            + 0.5 * m.inductance * di.norm_sqr()
            + 0.5 * (eta + m.field_flux * ss.in_phase_coupling) * a2;
        let scale = 1.0 + shifted_h + coef.abs();
        assert!((direct - form2).abs() < 1e-12 * scale, "{direct} {form2}");
        assert!((direct - form3).abs() < 1e-12 * scale, "{direct} {form3}");
        checked += 1;
    }
}

#[test]
fn raw_balance_equals_shifted_energy_rate() {
    let mut r = rng(5);
    let mut checked = 0;
    while checked < 1000 {
        let Some((m, g, ss)) = random_case(&mut r) else {
            continue;
        };
        let t = r.random_range(0.0..20.0);
        let x = random_state(&mut r);
        let xb = ss.state_at(t, &g);
        let vb = bus_voltage(t, &g);
        let v = vb + Complex::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3));
        let lhs = shifted_energy_rate(&x, &xb, &m, v, vb);
        let raw = raw_balance_rhs(&x, &xb, &m, v, vb);
        assert!((lhs - raw).abs() < 1e-10 * (1.0 + lhs.abs()));
        checked += 1;
    }
}

#[test]
fn bounded_balance_dominates_raw_balance() {
    let mut r = rng(6);
    let mut checked = 0;
    while checked < 1000 {
        let Some((m, g, ss)) = random_case(&mut r) else {
            continue;
        };
        let t = r.random_range(0.0..20.0);
        let x = random_state(&mut r);
        let xb = ss.state_at(t, &g);
        let vb = bus_voltage(t, &g);
        let v = vb + Complex::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3));
        let eta = r.random_range(0.0..3.0);
        let raw = raw_balance_rhs(&x, &xb, &m, v, vb);
        let bound = bounded_balance_rhs(&x, &xb, &m, v, vb, eta);
        assert!(bound >= raw - 1e-10 * (1.0 + raw.abs()), "{bound} < {raw}");
        checked += 1;
    }
}

/// Rate of `S` along the full field, both the state and the orbit moving,
/// by a central difference in time.
fn storage_rate(
    x: &PhysicalState,
    t: f64,
    ss: &SteadyState,
    eta: f64,
    m: &MachineParams,
    g: &GridParams,
) -> f64 {
    let h = 1e-6;
    let d = dynamics_rhs(t, x, m, g);
    let at = |sign: f64| {
        let y = PhysicalState::new(
            x.theta + sign * h * d.dtheta,
            x.omega + sign * h * d.domega,
            x.current + d.dcurrent * (sign * h),
        );
        storage(&embed(&y, g.phase_at(t + sign * h)), &ss.embedded(), eta, m).unwrap()
    };
    (at(1.0) - at(-1.0)) / (2.0 * h)
}

#[test]
fn storage_rate_decomposes_into_balance_and_torque_terms() {
    // Ṡ = raw balance + ½Tm(ω + ω̄)‖ξ − ξ̄‖² − (η − Jω̄² + λRe{Ī*ξ̄})·d⟨ξ, ξ̄⟩/dt.
    let mut r = rng(7);
    let m = fixtures::machine();
    let g = fixtures::grid();
    let ss = solve_steady_states(&m, &g).unwrap()[0];
    for _ in 0..200 {
        let t = r.random_range(0.0..10.0);
        let xb = ss.state_at(t, &g);
        let x = PhysicalState::new(
            xb.theta + r.random_range(-0.5..0.5),
            xb.omega + r.random_range(-0.1..0.1),
            xb.current + Complex::new(r.random_range(-0.1..0.1), r.random_range(-0.1..0.1)),
        );
        let eta = r.random_range(0.0..0.5);
        let vb = bus_voltage(t, &g);
        let (xi, xib) = (x.rotor_phasor(), xb.rotor_phasor());
        let a2 = (xi - xib).norm_sqr();
        let coef = eta - m.inertia * ss.omega.powi(2) + m.field_flux * ss.in_phase_coupling;
        let overlap_rate = -(x.omega - ss.omega) * inner(xi, Complex::i() * xib);
        let predicted = raw_balance_rhs(&x, &xb, &m, vb, vb)
            + 0.5 * m.mech_torque * (x.omega + ss.omega) * a2
            - coef * overlap_rate;
        let measured = storage_rate(&x, t, &ss, eta, &m, &g);
        assert!(
            (measured - predicted).abs() < 1e-7,
            "{measured} vs {predicted}"
        );
    }
}

#[test]
fn torque_term_with_frequency_difference_underestimates_storage_rate() {
    // Replacing ω + ω̄ by ω − ω̄ in the torque term drops Tm·ω̄·‖ξ − ξ̄‖²,
    // and the resulting bound −vᵀQv is then exceeded by the true rate.
    let m = fixtures::machine();
    let g = fixtures::grid();
    let ss = solve_steady_states(&m, &g).unwrap()[0];
    let units = fixtures::units();
    let xb = ss.state_at(0.0, &g);
    let x = PhysicalState::new(
        xb.theta - 0.3,
        xb.omega + 0.0146,
        xb.current + Complex::new(-0.04, 0.08),
    );
    let rate = storage_rate(&x, 0.0, &ss, 0.0, &m, &g);
    let s = embed(&x, g.phase_at(0.0));
    let v = smib_core::certificate::dissipation_vector(&s, &ss.embedded());
    let bound = -q_matrix(x.omega, &ss, &m, units.eta_scale() * 0.0).quadratic_form(v);
    assert!(rate > 0.0);
    assert!(rate - bound > 1.5);
    let missing = m.mech_torque * ss.omega * v[1] * v[1];
    assert!(rate - bound < missing);
}

#[test]
fn schur_equivalence_at_steady_frequency() {
    let mut r = rng(8);
    let mut checked = 0;
    let mut positives = 0;
    while checked < 1000 {
        let Some((m, _g, ss)) = random_case(&mut r) else {
            continue;
        };
        let units = if r.random_bool(0.5) {
            UnitSystem::Si
        } else {
            UnitSystem::PerUnit {
                omega_base: r.random_range(1.0..400.0),
            }
        };
        let eta = r.random_range(0.0..1.0) / units.eta_scale();
        let Ok(a) = check_assumption(&m, &ss, eta, &units) else {
            continue;
        };
        let w = ss.omega;
        let margins = [m.damping - m.inertia * w, a.k_hat];
        if margins.iter().any(|x| x.abs() < 1e-9) {
            continue;
        }
        let pd = q_matrix(w, &ss, &m, units.eta_scale() * eta).is_positive_definite();
        assert_eq!(pd, a.inertia_ok && a.margin_ok, "{m:?} {ss:?} {eta}");
        positives += pd as usize;
        checked += 1;
    }
    assert!(positives > 50);
}

#[test]
fn dissipation_matrix_positive_beyond_decay_radius() {
    let mut r = rng(9);
    let mut checked = 0;
    while checked < 1000 {
        let Some((m, _g, ss)) = random_case(&mut r) else {
            continue;
        };
        let units = UnitSystem::Si;
        let eta = r.random_range(0.0..0.5);
        let Ok(radius) = decay_radius(&m, &ss, eta, &units) else {
            continue;
        };
        if radius.rho < 1e-6 {
            continue;
        }
        for k in 0..50 {
            let w = ss.omega - radius.rho + 1e-9 + radius.rho * 11.0 * k as f64 / 49.0;
            assert!(
                q_matrix(w, &ss, &m, eta).is_positive_definite(),
                "{m:?} {eta} {w}"
            );
        }
        checked += 1;
    }
}
