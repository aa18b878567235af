//! Second-order check of the storage at the steady state.
//!
//! In local coordinates `(φ, δω, Re z, Im z)` the storage is
//! `½Jδω² + (Jω̄δω + r)(1 − cos φ) + ½L‖z‖²` with `r = η + λRe{Ī*ξ̄}`, so
//! its Hessian at the origin is `diag(r, J, L, L)`.

use super::{storage_unchecked, LocalCoords};
use crate::linearization::eig4;
use crate::model::MachineParams;
use crate::steady_state::SteadyState;

/// Finite-difference step in local coordinates.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Relative agreement required between the numeric and analytic Hessians.
pub const HESSIAN_REL_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HessianCheck {
    /// `r = η + λRe{Ī*ξ̄}`.
    pub angular_stiffness: f64,
    /// Smallest eigenvalue of the finite-difference Hessian.
    pub min_eigenvalue: f64,
    /// Numeric Hessian within tolerance of `diag(r, J, L, L)`.
    pub consistent: bool,
    /// `r > 0`, numeric minimum eigenvalue positive and consistent.
    pub positive: bool,
}

/// Central-difference Hessian of the storage in local coordinates.
pub fn numeric_hessian(ss: &SteadyState, eta: f64, m: &MachineParams, h: f64) -> [[f64; 4]; 4] {
    let sb = ss.embedded();
    let f =
        |x: [f64; 4]| storage_unchecked(&LocalCoords::from_array(x).to_embedded(ss), &sb, eta, m);
    let at = |pairs: &[(usize, f64)]| {
        let mut x = [0.0; 4];
        for &(i, d) in pairs {
            x[i] += d;
        }
        f(x)
    };
    let f0 = f([0.0; 4]);
    let mut hess = [[0.0; 4]; 4];
    for i in 0..4 {
        hess[i][i] = (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

pub fn hessian_positive(ss: &SteadyState, eta: f64, m: &MachineParams) -> HessianCheck {
    let r = eta + m.field_flux * ss.in_phase_coupling;
    let hess = numeric_hessian(ss, eta, m, HESSIAN_STEP);
    let expected = [r, m.inertia, m.inductance, m.inductance];

    let mut consistent = true;
    for i in 0..4 {
        for j in 0..4 {
            let target = if i == j { expected[i] } else { 0.0 };
            let scale = if i == j {
                crate::math::abs(expected[i])
            } else {
                crate::math::sqrt(crate::math::abs(expected[i] * expected[j]))
            };
            if crate::math::abs(hess[i][j] - target) > HESSIAN_REL_TOL * scale + 1e-6 {
                consistent = false;
            }
        }
    }

    let min_eigenvalue = match eig4(&hess) {
        Ok(ev) => ev.iter().map(|z| z.re).fold(f64::INFINITY, f64::min),
        Err(_) => f64::NAN,
    };
    HessianCheck {
        angular_stiffness: r,
        min_eigenvalue,
        consistent,
        positive: r > 0.0 && min_eigenvalue > 0.0 && consistent,
    }
}
