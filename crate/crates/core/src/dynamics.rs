//! The map `f(z) = λ·e^z`, its attracting cycle and pointwise classification.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Moduli above this are treated as having reached infinity.
pub const OVERFLOW_MODULUS: f64 = 1e300;

/// Value returned by [`apply`] once `exp` leaves the representable range.
pub const AT_INFINITY: Complex64 = Complex64::new(f64::INFINITY, 0.0);

/// Absolute capture radius around each cycle point.
pub const CAPTURE_RADIUS: f64 = 0.1;

/// Trailing window used to read off the period of the singular orbit.
const DETECT_WINDOW: usize = 64;
/// Relative agreement required inside the window before Newton refinement.
const DETECT_TOL: f64 = 1e-9;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_STEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("lambda must be a finite nonzero complex number, got {0}")]
    BadLambda(Complex64),
    #[error("max_iter must be positive")]
    ZeroIterations,
    #[error("{0} must be finite and positive")]
    BadTolerance(&'static str),
}

/// Why no attracting cycle was reported.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoCycle {
    #[error("singular orbit escaped")]
    Escaped,
    #[error("iteration budget exhausted before the singular orbit settled")]
    BudgetExhausted,
    #[error("periodic orbit found but it is not attracting")]
    MultiplierNotAttracting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpMapConfig {
    pub lambda: Complex64,
    pub arg_lambda: f64,
    pub max_iter: u32,
    pub escape_re: f64,
    pub attract_tol: f64,
}

impl ExpMapConfig {
    pub fn new(lambda: Complex64) -> Result<Self, ConfigError> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) || lambda == Complex64::new(0.0, 0.0)
        {
            return Err(ConfigError::BadLambda(lambda));
        }
        Ok(Self {
            lambda,
            arg_lambda: crate::cmath::plog(lambda).im,
            max_iter: 1000,
            escape_re: 50.0,
            attract_tol: 1e-12,
        })
    }

    pub fn with_max_iter(mut self, max_iter: u32) -> Result<Self, ConfigError> {
        if max_iter == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        self.max_iter = max_iter;
        Ok(self)
    }

    pub fn with_escape_re(mut self, escape_re: f64) -> Result<Self, ConfigError> {
        if !(escape_re.is_finite() && escape_re > 0.0) {
            return Err(ConfigError::BadTolerance("escape_re"));
        }
        self.escape_re = escape_re;
        Ok(self)
    }

    pub fn with_attract_tol(mut self, tol: f64) -> Result<Self, ConfigError> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(ConfigError::BadTolerance("attract_tol"));
        }
        self.attract_tol = tol;
        Ok(self)
    }

    pub fn ln_abs_lambda(&self) -> f64 {
        self.lambda.norm().ln()
    }
}

/// `z_0 … z_{p−1}` with `f(z_j) = z_{j+1}`; `z_1` is the limit of `f^{np}(0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractingCycle {
    pub period: usize,
    pub points: Vec<Complex64>,
    pub multiplier: Complex64,
}

impl AttractingCycle {
    /// Capture radius actually used: [`CAPTURE_RADIUS`], shrunk if cycle points crowd.
    pub fn capture_radius(&self) -> f64 {
        let mut r = CAPTURE_RADIUS;
        for i in 0..self.period {
            for j in i + 1..self.period {
                r = r.min(0.25 * (self.points[i] - self.points[j]).norm());
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointClass {
    Attracted { phase: usize, steps: u32 },
    Escaped { steps: u32 },
    Undecided,
}

pub fn is_at_infinity(z: Complex64) -> bool {
    !(z.re.is_finite() && z.im.is_finite()) || z.norm() > OVERFLOW_MODULUS
}

/// `λ·e^z`, or [`AT_INFINITY`] when the result is not representable.
pub fn apply(cfg: &ExpMapConfig, z: Complex64) -> Complex64 {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return AT_INFINITY;
    }
    let w = cfg.lambda * z.exp();
    if w.re.is_finite() && w.im.is_finite() {
        w
    } else {
        AT_INFINITY
    }
}

/// `f^n(z)` and `(f^n)'(z) = ∏_{k=1}^{n} f^k(z)`.
fn iterate_with_derivative(cfg: &ExpMapConfig, z: Complex64, n: usize) -> (Complex64, Complex64) {
    let mut w = z;
    let mut d = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        w = apply(cfg, w);
        d *= w;
    }
    (w, d)
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() < tol * a.norm().max(b.norm()).max(1.0)
}

/// Damped Newton on `f^p(z) − z`.
fn refine_periodic_point(cfg: &ExpMapConfig, seed: Complex64, p: usize) -> Complex64 {
    let residual = |z: Complex64| {
        let (w, d) = iterate_with_derivative(cfg, z, p);
        (w - z, d - 1.0)
    };
    let mut z = seed;
    let (mut f, mut df) = residual(z);
    for _ in 0..NEWTON_MAX_STEPS {
        if df == Complex64::new(0.0, 0.0) || !f.norm().is_finite() {
            break;
        }
        let step = f / df;
        let mut damp = 1.0;
        let mut accepted = false;
        while damp > 1e-6 {
            let cand = z - step * damp;
            let (fc, dfc) = residual(cand);
            if fc.norm().is_finite() && fc.norm() <= f.norm() {
                z = cand;
                f = fc;
                df = dfc;
                accepted = true;
                break;
            }
            damp *= 0.5;
        }
        if !accepted || (step * damp).norm() < NEWTON_TOL * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Follows the singular orbit `0, λ, λe^λ, …` until it settles on a cycle.
pub fn find_attracting_cycle(
    cfg: &ExpMapConfig,
    max_period: usize,
) -> Result<AttractingCycle, NoCycle> {
    assert!(max_period >= 1, "max_period must be at least 1");
    let window = DETECT_WINDOW.max(2 * max_period + 1);
    let mut orbit: Vec<Complex64> = Vec::with_capacity(cfg.max_iter as usize + 1);
    let mut z = Complex64::new(0.0, 0.0);
    orbit.push(z);
    for _ in 0..cfg.max_iter {
        let next = apply(cfg, z);
        if is_at_infinity(next) || (z.re > cfg.escape_re && next.norm() > 2.0 * z.norm()) {
            return Err(NoCycle::Escaped);
        }
        z = next;
        orbit.push(z);
        if orbit.len() < window {
            continue;
        }
        let tail = &orbit[orbit.len() - window..];
        let period = (1..=max_period)
            .find(|&p| (p..tail.len()).all(|i| close(tail[i], tail[i - p], DETECT_TOL)));
        if let Some(q) = period {
            // A rotating multiplier can make a multiple of the period show up first.
            for d in (1..=q).filter(|d| q % d == 0) {
                if let Some(result) = cycle_from_orbit(cfg, &orbit, d) {
                    return result;
                }
            }
            return Err(NoCycle::BudgetExhausted);
        }
    }
    Err(NoCycle::BudgetExhausted)
}

/// `None` when the orbit tail does not refine to a cycle of period `p`.
fn cycle_from_orbit(
    cfg: &ExpMapConfig,
    orbit: &[Complex64],
    p: usize,
) -> Option<Result<AttractingCycle, NoCycle>> {
    // Index of the last orbit entry that is a multiple of p; that entry tends to z_1.
    let last = orbit.len() - 1;
    let anchor = last - last % p;
    let seeds: Vec<Complex64> = (0..p)
        .map(|j| {
            // z_j sits (j − 1) steps after the anchor, modulo p.
            let offset = (j + p - 1) % p;
            let idx = if anchor + offset <= last { anchor + offset } else { anchor + offset - p };
            orbit[idx]
        })
        .collect();
    let points: Vec<Complex64> = seeds.iter().map(|&s| refine_periodic_point(cfg, s, p)).collect();
    let near_seeds = points
        .iter()
        .zip(&seeds)
        .all(|(&z, &s)| close(z, s, 1e3 * DETECT_TOL));
    let multiplier = points.iter().fold(Complex64::new(1.0, 0.0), |acc, &z| acc * z);
    let cycle = AttractingCycle { period: p, points, multiplier };
    if !near_seeds || !cycle_invariants_hold(cfg, &cycle) {
        return None;
    }
    if multiplier.norm() >= 1.0 {
        return Some(Err(NoCycle::MultiplierNotAttracting));
    }
    Some(Ok(cycle))
}

/// Closure under `f`, distinct points and minimal period, checked by direct iteration.
pub fn cycle_invariants_hold(cfg: &ExpMapConfig, cycle: &AttractingCycle) -> bool {
    let p = cycle.period;
    if p == 0 || cycle.points.len() != p {
        return false;
    }
    let closed = (0..p).all(|j| {
        let zj = cycle.points[j];
        (apply(cfg, zj) - cycle.points[(j + 1) % p]).norm() < cfg.attract_tol * zj.norm().max(1.0)
    });
    let distinct = (0..p).all(|i| {
        (i + 1..p).all(|j| (cycle.points[i] - cycle.points[j]).norm() > 1e3 * cfg.attract_tol)
    });
    closed && distinct
}

/// Attracted when the orbit comes within the capture radius of a cycle point.
///
/// The phase is `(j − n) mod p` for capture at `z_j` after `n` steps, so
/// `phase(f(z)) = phase(z) + 1`.
pub fn classify_point(cfg: &ExpMapConfig, cycle: &AttractingCycle, z: Complex64) -> PointClass {
    classify_with_radius(cfg, cycle, cycle.capture_radius(), z)
}

pub(crate) fn classify_with_radius(
    cfg: &ExpMapConfig,
    cycle: &AttractingCycle,
    radius: f64,
    z: Complex64,
) -> PointClass {
    let p = cycle.period;
    let mut w = z;
    for n in 0..=cfg.max_iter {
        if is_at_infinity(w) {
            return PointClass::Escaped { steps: n };
        }
        for (j, &c) in cycle.points.iter().enumerate() {
            if (w - c).norm() < radius {
                let phase = (j + p - (n as usize % p)) % p;
                return PointClass::Attracted { phase, steps: n };
            }
        }
        let next = apply(cfg, w);
        if w.re > cfg.escape_re && (is_at_infinity(next) || next.norm() > 2.0 * w.norm()) {
            return PointClass::Escaped { steps: n };
        }
        w = next;
    }
    PointClass::Undecided
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn minus_five() -> ExpMapConfig {
        ExpMapConfig::new(c(-5.0, 0.0)).unwrap()
    }

    /// Real 2-cycle of x ↦ −5e^x by plain iteration of the second iterate from 0.
    fn oracle_minus_five_cycle() -> (f64, f64) {
        let mut x = 0.0f64;
        for _ in 0..10_000 {
            x = -5.0 * (-5.0 * x.exp()).exp();
        }
        (-5.0 * x.exp(), x)
    }

    #[test]
    fn apply_examples() {
        let one = ExpMapConfig::new(c(1.0, 0.0)).unwrap();
        assert_eq!(apply(&one, c(0.0, 0.0)), c(1.0, 0.0));
        let cfg = minus_five();
        assert_eq!(apply(&cfg, c(0.0, 0.0)), c(-5.0, 0.0));
        let w = apply(&cfg, c(-5.0, 0.0));
        assert!((w.re - (-5.0 * (-5.0f64).exp())).abs() < 1e-17);
        assert!((w.re + 0.033690).abs() < 1e-6);
    }

    #[test]
    fn apply_overflow_hits_sentinel() {
        let cfg = minus_five();
        assert!(is_at_infinity(apply(&cfg, c(800.0, 0.0))));
        assert!(is_at_infinity(apply(&cfg, AT_INFINITY)));
    }

    #[test]
    fn rejects_zero_lambda() {
        assert!(ExpMapConfig::new(c(0.0, 0.0)).is_err());
        assert!(ExpMapConfig::new(c(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn arg_lambda_is_principal() {
        assert_eq!(minus_five().arg_lambda, std::f64::consts::PI);
        let cfg = ExpMapConfig::new(c(0.0, -2.0)).unwrap();
        assert!((cfg.arg_lambda + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn minus_five_has_real_two_cycle() {
        let cfg = minus_five();
        let cycle = find_attracting_cycle(&cfg, 4).unwrap();
        let (z0, z1) = oracle_minus_five_cycle();
        assert_eq!(cycle.period, 2);
        assert!((cycle.points[0] - c(z0, 0.0)).norm() < 1e-12);
        assert!((cycle.points[1] - c(z1, 0.0)).norm() < 1e-12);
        assert!(cycle.points[0].im.abs() < 1e-14 && cycle.points[1].im.abs() < 1e-14);
        assert!((cycle.points[0].re + 4.798045654607696).abs() < 1e-12);
        assert!((cycle.points[1].re + 0.0412292327205392).abs() < 1e-13);
        assert!(cycle.multiplier.norm() < 1.0);
        assert!(cycle_invariants_hold(&cfg, &cycle));
    }

    #[test]
    fn small_real_lambda_has_fixed_point() {
        let cfg = ExpMapConfig::new(c(0.3, 0.0)).unwrap();
        let cycle = find_attracting_cycle(&cfg, 4).unwrap();
        let mut x = 0.0f64;
        for _ in 0..10_000 {
            x = 0.3 * x.exp();
        }
        assert_eq!(cycle.period, 1);
        assert!((cycle.points[0].re - x).abs() < 1e-12);
        assert!((x - 0.489402227180215).abs() < 1e-12);
    }

    #[test]
    fn exp_itself_escapes() {
        let cfg = ExpMapConfig::new(c(1.0, 0.0)).unwrap();
        assert_eq!(find_attracting_cycle(&cfg, 4), Err(NoCycle::Escaped));
    }

    #[test]
    fn tiny_budget_is_reported() {
        let cfg = minus_five().with_max_iter(10).unwrap();
        assert_eq!(find_attracting_cycle(&cfg, 4), Err(NoCycle::BudgetExhausted));
    }

    #[test]
    fn classify_examples() {
        let cfg = minus_five();
        let cycle = find_attracting_cycle(&cfg, 4).unwrap();
        assert_eq!(
            classify_point(&cfg, &cycle, cycle.points[0]),
            PointClass::Attracted { phase: 0, steps: 0 }
        );
        match classify_point(&cfg, &cycle, c(1e3, 0.0)) {
            PointClass::Escaped { steps } => assert!(steps <= 2),
            other => panic!("expected escape, got {other:?}"),
        }
        assert!(matches!(
            classify_point(&cfg, &cycle, c(-1.0, 0.0)),
            PointClass::Attracted { .. }
        ));
    }

    #[test]
    fn left_half_plane_maps_into_small_disk() {
        let cfg = minus_five();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let z = c(-cfg.escape_re - rng.gen_range(0.0..100.0), rng.gen_range(-1e3..1e3));
            let w = apply(&cfg, z);
            assert!(w.norm() < 5.0 * (-cfg.escape_re).exp());
        }
    }

    #[test]
    fn phase_advances_along_orbit() {
        let cfg = minus_five();
        let cycle = find_attracting_cycle(&cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..500 {
            let z = c(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            if let PointClass::Attracted { phase, steps } = classify_point(&cfg, &cycle, z) {
                if steps == 0 {
                    continue;
                }
                let next = classify_point(&cfg, &cycle, apply(&cfg, z));
                assert_eq!(next, PointClass::Attracted { phase: (phase + 1) % 2, steps: steps - 1 });
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn coarse_grid_sees_both_phases() {
        let cfg = minus_five();
        let cycle = find_attracting_cycle(&cfg, 4).unwrap();
        let mut seen = [false; 2];
        for i in 0..20 {
            for j in 0..20 {
                let z = c(-6.0 + 0.6 * i as f64, -6.0 + 0.6 * j as f64);
                if let PointClass::Attracted { phase, .. } = classify_point(&cfg, &cycle, z) {
                    seen[phase] = true;
                }
            }
        }
        assert!(seen[0] && seen[1]);
    }

    /// A 2-cycle built with one point at height ≈2π: the singular orbit's even
    /// iterates settle on the other, small point, which therefore becomes z_1.
    #[test]
    fn high_cycle_point_becomes_z0() {
        let target = c(-4.1, 2.0 * std::f64::consts::PI);
        let rhs = target * target.exp();
        let mut z0 = c(0.1, 0.0);
        for _ in 0..60 {
            let f = z0 * z0.exp() - rhs;
            let df = (z0 + 1.0) * z0.exp();
            z0 -= f / df;
        }
        let lambda = target * (-z0).exp();
        let cfg = ExpMapConfig::new(lambda).unwrap().with_max_iter(20_000).unwrap();
        let cycle = find_attracting_cycle(&cfg, 4).unwrap();
        assert_eq!(cycle.period, 2);
        assert!((cycle.points[0] - target).norm() < 1e-8);
        assert!((cycle.points[1] - z0).norm() < 1e-8);
    }
}
