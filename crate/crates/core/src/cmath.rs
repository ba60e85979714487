//! Small complex helpers with explicit branch conventions.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Principal logarithm with imaginary part in `(−π, π]`.
///
/// `atan2` returns `−π` for a negative real axis approached with `-0.0`; that
/// value is folded to `π` so the half-open convention holds for signed zeros.
pub fn plog(z: Complex64) -> Complex64 {
    let mut arg = z.im.atan2(z.re);
    if arg <= -PI {
        arg = PI;
    }
    Complex64::new(z.norm().ln(), arg)
}

/// `log(1 + u)` on the principal branch, accurate for small `|u|`.
///
/// Only valid where `1 + u` stays off the cut, which callers guarantee by
/// keeping `|u| < 1`.
pub fn log1p(u: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * u.re + u.norm_sqr()).ln_1p();
    let im = u.im.atan2(1.0 + u.re);
    Complex64::new(re, im)
}

/// Relative distance `|a − b| / max(1, |b|)`.
pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plog_negative_axis_both_zero_signs() {
        let a = plog(Complex64::new(-2.0, 0.0));
        let b = plog(Complex64::new(-2.0, -0.0));
        assert_eq!(a.im, PI);
        assert_eq!(b.im, PI);
        assert!((a.re - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log1p_matches_ln_for_moderate_u() {
        for &u in &[
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.5, 0.4),
            Complex64::new(0.0, 0.9),
        ] {
            let want = (Complex64::new(1.0, 0.0) + u).ln();
            assert!((log1p(u) - want).norm() < 1e-15);
        }
    }

    #[test]
    fn log1p_keeps_relative_precision_for_tiny_u() {
        let u = Complex64::new(1e-20, 3e-20);
        let l = log1p(u);
        assert!((l.re - 1e-20).abs() < 1e-34);
        assert!((l.im - 3e-20).abs() < 1e-34);
    }
}
