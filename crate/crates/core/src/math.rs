//! Thin wrappers over `libm` so the same scalar routines are used in every
//! build configuration.

use num_complex::Complex64;

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

/// `e^{jx}`.
#[inline]
pub(crate) fn cis(x: f64) -> Complex64 {
    Complex64::new(cos(x), sin(x))
}

#[inline]
pub(crate) fn norm(z: Complex64) -> f64 {
    hypot(z.re, z.im)
}

#[inline]
pub(crate) fn norm_sqr(z: Complex64) -> f64 {
    z.re * z.re + z.im * z.im
}

/// Real inner product `Re{a* b}`.
#[inline]
pub(crate) fn inner(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Reduces an angle to `[-π, π)`.
pub(crate) fn wrap_angle(x: f64) -> f64 {
    use core::f64::consts::{PI, TAU};
    let r = libm::fmod(x + PI, TAU);
    let r = if r < 0.0 { r + TAU } else { r };
    let w = r - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

pub(crate) const J: Complex64 = Complex64::new(0.0, 1.0);

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let x = 0.3 + 2.0 * PI * k as f64;
            assert!((wrap_angle(x) - 0.3).abs() < 1e-12);
        }
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
    }
}
