//! Eigenvalues of a real 4×4 matrix from its characteristic polynomial.

use num_complex::Complex64;
use thiserror::Error;

use crate::math;

/// Newton iterations allowed per root.
pub const POLISH_ITERATIONS: usize = 50;
/// Residual bound `|det(A − λI)| ≤ EIG_RESIDUAL_REL·‖A‖⁴`.
pub const EIG_RESIDUAL_REL: f64 = 1e-8;
const DK_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("eigenvalue {root} did not converge (residual {residual:e})")]
    ConvergenceFailure { root: Complex64, residual: f64 },
}

type Mat4 = [[f64; 4]; 4];

fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn trace(a: &Mat4) -> f64 {
    a[0][0] + a[1][1] + a[2][2] + a[3][3]
}

pub(crate) fn frobenius(a: &Mat4) -> f64 {
    math::sqrt(a.iter().flatten().map(|x| x * x).sum())
}

/// Coefficients `[1, c1, c2, c3, c4]` of `det(λI − A)` by Faddeev–LeVerrier.
pub fn char_poly(a: &Mat4) -> [f64; 5] {
    let mut coeffs = [1.0, 0.0, 0.0, 0.0, 0.0];
    let mut mk = [[0.0; 4]; 4];
    for (i, row) in mk.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for k in 1..=4 {
        let am = mat_mul(a, &mk);
        let ck = -trace(&am) / k as f64;
        coeffs[k] = ck;
        mk = am;
        for (i, row) in mk.iter_mut().enumerate() {
            row[i] += ck;
        }
    }
    coeffs
}

fn horner(c: &[f64; 5], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(c[0], 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in &c[1..] {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

fn durand_kerner(c: &[f64; 5], radius: f64) -> [Complex64; 4] {
    let seed = Complex64::new(0.4, 0.9);
    let mut z = [Complex64::new(0.0, 0.0); 4];
    let mut w = Complex64::new(radius, 0.0);
    for zi in z.iter_mut() {
        *zi = w;
        w *= seed;
    }
    for _ in 0..DK_ITERATIONS {
        let mut moved = 0.0f64;
        for i in 0..4 {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den == Complex64::new(0.0, 0.0) {
                continue;
            }
            let step = horner(c, z[i]).0 / den;
            z[i] -= step;
            moved = moved.max(math::norm(step));
        }
        if moved <= 1e-15 * radius {
            break;
        }
    }
    z
}

/// Pairs near-conjugate roots and snaps near-real roots to the real axis.
fn conjugate_closure(z: &mut [Complex64; 4], scale: f64) {
    let tol = 1e-9 * scale;
    for zi in z.iter_mut() {
        if math::abs(zi.im) <= tol {
            zi.im = 0.0;
        }
    }
    let mut used = [false; 4];
    for i in 0..4 {
        if used[i] || z[i].im <= 0.0 {
            continue;
        }
        let partner = (0..4)
            .filter(|&j| !used[j] && j != i && z[j].im < 0.0)
            .min_by(|&a, &b| {
                math::norm(z[a] - z[i].conj())
                    .partial_cmp(&math::norm(z[b] - z[i].conj()))
                    .unwrap_or(core::cmp::Ordering::Equal)
            });
        if let Some(j) = partner {
            let avg = (z[i] + z[j].conj()) * 0.5;
            z[i] = avg;
            z[j] = avg.conj();
            used[i] = true;
            used[j] = true;
        }
    }
}

/// Sorts by real part, then imaginary part.
pub fn sort_eigenvalues(z: &mut [Complex64; 4]) {
    z.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(
                a.im.partial_cmp(&b.im)
                    .unwrap_or(core::cmp::Ordering::Equal),
            )
    });
}

/// `det(A − λI)` evaluated through the characteristic polynomial.
pub fn char_residual(a: &Mat4, lambda: Complex64) -> f64 {
    math::norm(horner(&char_poly(a), lambda).0)
}

/// Eigenvalues of a real 4×4 matrix, sorted by real then imaginary part.
///
/// The matrix is shifted by `tr(A)/4` before forming the characteristic
/// polynomial; roots are found by Durand–Kerner iteration and polished by
/// Newton's method on the unshifted polynomial.
pub fn eig4(a: &Mat4) -> Result<[Complex64; 4], EigenError> {
    if !a.iter().flatten().all(|x| x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let norm_a = frobenius(a);
    let shift = trace(a) / 4.0;
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= shift;
    }
    let cb = char_poly(&b);
    let norm_b = frobenius(&b);

    let mut z = if norm_b <= 1e-300 {
        [Complex64::new(0.0, 0.0); 4]
    } else {
        // Cauchy bound on the root moduli.
        let bound = 1.0 + cb[1..].iter().fold(0.0f64, |m, c| m.max(math::abs(*c)));
        durand_kerner(&cb, bound.min(2.0 * norm_b + 1.0))
    };
    for zi in z.iter_mut() {
        *zi += shift;
    }

    let ca = char_poly(a);
    let n2 = norm_a * norm_a;
    let limit = EIG_RESIDUAL_REL * n2 * n2;
    for zi in z.iter_mut() {
        let mut residual = math::norm(horner(&ca, *zi).0);
        let mut iter = 0;
        while residual > limit && iter < POLISH_ITERATIONS {
            let (p, dp) = horner(&ca, *zi);
            if dp == Complex64::new(0.0, 0.0) {
                break;
            }
            let next = *zi - p / dp;
            let r_next = math::norm(horner(&ca, next).0);
            if !(r_next < residual) {
                break;
            }
            *zi = next;
            residual = r_next;
            iter += 1;
        }
        if !(residual <= limit) {
            return Err(EigenError::ConvergenceFailure {
                root: *zi,
                residual,
            });
        }
    }
    conjugate_closure(&mut z, norm_a.max(1e-300));
    sort_eigenvalues(&mut z);
    Ok(z)
}
