//! Pressure of conformal iterated function systems and Bowen-root bisection.
//!
//! Two systems are provided:
//!
//! * [`ExplicitIfs`]: a finite list of maps, pressure from depth-`n` word sums.
//! * [`HairIfs`]: the maps `h_{u,s} = G_{u,k̲} ∘ G_{s,k̲}` of the exponential family
//!   restricted to the square `Q = [R/2, 3R/2]²`. Images of `Q` hug the lines
//!   `Im y = 2πm − Arg λ` and the letters `s` needed to reach `Q` are far beyond
//!   any integer type, so the sum over `s` is evaluated as an integral over the
//!   image abscissa `ξ`. The derivative factors as
//!   `|h'_{u,s}(z)| = ψ(z) · |G'_{u,k̲}(v_s)|` with `ψ = |G'_{s,k̲}|` independent
//!   of `s`, so the transfer operator has rank one:
//!   `L_t φ(z) = ψ(z)^t ⟨μ_t, φ⟩` and `P(t) = ln⟨μ_t, ψ^t⟩`.
//!
//! Exponents near 1 are carried as `t = 1 + excess` with the excess in `f64`,
//! because dimension bounds of the form `1 + 10^{−150}` are the expected output.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::ExpMapConfig;
use crate::symbolic::{word_log_derivative, BranchWord, Kneading, SymbolicError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PressureError {
    #[error("no admissible maps: square too small for R = {0}")]
    EmptySystem(f64),
    #[error("depth-{depth} enumeration needs {words} words, above the cap {cap}")]
    Budget { depth: usize, words: f64, cap: usize },
    #[error("bracket fails: lower(t_lo) = {lower_lo}, upper(t_hi) = {upper_hi}")]
    BracketFailure { lower_lo: f64, upper_hi: f64 },
    #[error("invalid pressure parameters: {0}")]
    InvalidParams(String),
    #[error("no R in the schedule certified dimension above 1")]
    NotCertified,
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// `t = 1 + excess`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Exponent {
    pub excess: f64,
}

impl Exponent {
    pub fn from_value(t: f64) -> Self {
        Exponent { excess: t - 1.0 }
    }

    pub fn one_plus(excess: f64) -> Self {
        Exponent { excess }
    }

    pub fn value(&self) -> f64 {
        1.0 + self.excess
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressureEstimate {
    pub t: Exponent,
    pub lower: f64,
    pub upper: f64,
    pub level: usize,
}

pub trait PressureSystem: Sync {
    /// `lower ≤ P(t) ≤ upper` from depth-`n` information.
    fn pressure_bounds(&self, t: Exponent, n: usize) -> Result<PressureEstimate, PressureError>;
}

/// `ln Σ exp(x_i)`; empty or all `−∞` inputs give `−∞`.
fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Lattice of `side × side` points covering `[x0, x1] × [y0, y1]`, edges included.
pub fn square_grid(x0: f64, x1: f64, y0: f64, y1: f64, side: usize) -> Vec<Complex64> {
    let side = side.max(2);
    let step = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (side - 1) as f64;
    (0..side)
        .flat_map(|j| (0..side).map(move |i| Complex64::new(step(x0, x1, i), step(y0, y1, j))))
        .collect()
}

// ---------------------------------------------------------------------------
// Explicit systems

/// A contracting conformal map with known derivative modulus.
pub trait ConformalMap: Send + Sync {
    fn eval(&self, z: Complex64) -> Complex64;
    fn deriv_modulus(&self, z: Complex64) -> f64;
}

/// `z ↦ ratio·z + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub ratio: f64,
    pub offset: Complex64,
}

impl ConformalMap for Similarity {
    fn eval(&self, z: Complex64) -> Complex64 {
        z * self.ratio + self.offset
    }

    fn deriv_modulus(&self, _z: Complex64) -> f64 {
        self.ratio.abs()
    }
}

/// A branch word of the exponential map used as an IFS generator.
#[derive(Debug, Clone)]
pub struct WordMap {
    pub cfg: ExpMapConfig,
    pub word: BranchWord,
}

impl ConformalMap for WordMap {
    fn eval(&self, z: Complex64) -> Complex64 {
        crate::symbolic::apply_word(&self.cfg, &self.word, z).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }

    fn deriv_modulus(&self, z: Complex64) -> f64 {
        word_log_derivative(&self.cfg, &self.word, z).map_or(f64::NAN, f64::exp)
    }
}

/// Word enumeration cap for [`ExplicitIfs`].
pub const WORD_CAP: usize = 1_000_000;

pub struct ExplicitIfs {
    pub maps: Vec<Box<dyn ConformalMap>>,
    /// Sample points of the invariant square.
    pub grid: Vec<Complex64>,
    /// `max_i sup_grid |h_i'| / inf_grid |h_i'|`.
    pub distortion: f64,
}

impl ExplicitIfs {
    pub fn new(maps: Vec<Box<dyn ConformalMap>>, grid: Vec<Complex64>) -> Result<Self, PressureError> {
        if maps.is_empty() || grid.is_empty() {
            return Err(PressureError::InvalidParams("explicit IFS needs maps and grid points".into()));
        }
        let distortion = maps
            .iter()
            .map(|m| {
                let (lo, hi) = grid.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &z| {
                    let d = m.deriv_modulus(z);
                    (lo.min(d), hi.max(d))
                });
                hi / lo
            })
            .fold(1.0, f64::max);
        Ok(ExplicitIfs { maps, grid, distortion })
    }

    /// Three similarities of ratio 1/4 on the unit square, dimension `ln 3 / ln 4`.
    pub fn toy_three_quarters() -> Self {
        let maps: Vec<Box<dyn ConformalMap>> = [(0.0, 0.0), (0.75, 0.0), (0.0, 0.75)]
            .iter()
            .map(|&(x, y)| Box::new(Similarity { ratio: 0.25, offset: Complex64::new(x, y) }) as Box<dyn ConformalMap>)
            .collect();
        ExplicitIfs::new(maps, square_grid(0.0, 1.0, 0.0, 1.0, 9)).expect("nonempty")
    }

    /// `ln Σ_{|w|=n} |h_w'(z)|^t`, by recursion on the first map applied.
    fn ln_word_sum(&self, t: f64, z: Complex64, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let terms: Vec<f64> = self
            .maps
            .iter()
            .map(|m| t * m.deriv_modulus(z).ln() + self.ln_word_sum(t, m.eval(z), n - 1))
            .collect();
        log_sum_exp(terms.into_iter())
    }
}

impl PressureSystem for ExplicitIfs {
    fn pressure_bounds(&self, t: Exponent, n: usize) -> Result<PressureEstimate, PressureError> {
        if n == 0 {
            return Err(PressureError::InvalidParams("depth must be at least 1".into()));
        }
        let words = (self.maps.len() as f64).powi(n as i32);
        if words > WORD_CAP as f64 {
            return Err(PressureError::Budget { depth: n, words, cap: WORD_CAP });
        }
        let tv = t.value();
        let sums: Vec<f64> = self.grid.par_iter().map(|&z| self.ln_word_sum(tv, z, n)).collect();
        let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let slack = tv * self.distortion.ln();
        let nn = n as f64;
        Ok(PressureEstimate { t, lower: (lo - slack) / nn, upper: (hi + slack) / nn, level: n })
    }
}

// ---------------------------------------------------------------------------
// Exponential system

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HairParams {
    pub r: f64,
    /// Images are kept at least this far inside `Q`.
    pub margin: f64,
    /// Side of the lattice on `Q` used for inf/sup.
    pub grid_side: usize,
    /// Quadrature step in `ξ`.
    pub xi_step: f64,
}

impl HairParams {
    pub fn new(r: f64) -> Self {
        HairParams { r, margin: 1.0, grid_side: 33, xi_step: 0.02 }
    }
}

/// The `(u, s)`-system on `Q` in block form.
#[derive(Debug, Clone, Serialize)]
pub struct HairIfs {
    pub params: HairParams,
    pub lambda: Complex64,
    pub period: usize,
    pub z_r: Complex64,
    /// Heights `η` of the lines the images accumulate on.
    pub lines: Vec<f64>,
    /// Each line carries one block from `s > 0` and one from `s < 0`.
    pub blocks: usize,
    pub xi_lo: f64,
    pub xi_hi: f64,
    /// `max ψ / min ψ` over the lattice.
    pub distortion: f64,
    /// Bound on `ψ(z)/ψ(node)` for `z` in a lattice cell around the node.
    pub ln_rho: f64,
    #[serde(skip)]
    nodes: Quadrature,
    #[serde(skip)]
    ln_psi_lines: Vec<Vec<f64>>,
    #[serde(skip)]
    ln_psi_grid: Vec<f64>,
    #[serde(skip)]
    cfg_word: Option<(ExpMapConfig, BranchWord)>,
}

#[derive(Debug, Clone, Default)]
struct Quadrature {
    ln_weights: Vec<f64>,
    /// `ln Λ(ξ)` at the nodes, `Λ = Σ_{j=1}^{p} ln |f^j(y)|` on the line.
    ln_big_lambda: Vec<f64>,
    xi: Vec<f64>,
}

/// `ln Λ(ξ)` where `L_1 = ln|λ| + ξ`, `L_{j+1} = ln|λ| + e^{L_j}` and `Λ = Σ L_j`.
///
/// On a line `Im y = 2πm − Arg λ` the iterate `f(y)` is a positive real, so
/// `|f^{j+1}(y)| = |λ| e^{|f^j(y)|}` up to `O(e^{−|f^j|})`.
pub fn ln_big_lambda(ln_abs_lambda: f64, xi: f64, p: usize) -> f64 {
    // Track ln L_j to survive L_j beyond the f64 range.
    let mut ln_l = Vec::with_capacity(p);
    let mut l1 = ln_abs_lambda + xi;
    if l1 <= 0.0 {
        // Only reachable for tiny ξ; Λ is then small and positive through later terms.
        l1 = l1.max(f64::MIN_POSITIVE);
    }
    ln_l.push(l1.ln());
    for j in 1..p {
        let prev = ln_l[j - 1];
        let next = if prev > 709.0 {
            // L_j = e^{prev} overflows; ln(ln|λ| + e^{L_j}) = L_j up to e^{−L_j}.
            if prev.exp().is_finite() { prev.exp() } else { f64::INFINITY }
        } else {
            let lj = prev.exp();
            let e = lj.exp();
            if e.is_finite() {
                (ln_abs_lambda + e).max(f64::MIN_POSITIVE).ln()
            } else {
                lj + (ln_abs_lambda * (-lj).exp()).ln_1p()
            }
        };
        ln_l.push(next);
    }
    let top = ln_l[p - 1];
    if !top.is_finite() {
        return top;
    }
    top + ln_l[..p - 1].iter().map(|&x| (x - top).exp()).sum::<f64>().ln_1p()
}

/// `e · Λ` computed in log space; `±∞` when it leaves the f64 range.
fn scaled_lambda(excess: f64, ln_big: f64) -> f64 {
    if excess == 0.0 {
        return 0.0;
    }
    let v = (excess.abs().ln() + ln_big).exp();
    excess.signum() * v
}

impl HairIfs {
    /// Lines `η` and the abscissa window `[R/2 + margin, 3R/2 − margin]`.
    pub fn build(cfg: &ExpMapConfig, k: &Kneading, params: HairParams) -> Result<Self, PressureError> {
        let r = params.r;
        if !(r.is_finite() && r > 0.0) || !(params.xi_step > 0.0) || params.grid_side < 2 {
            return Err(PressureError::InvalidParams(format!("bad hair parameters {params:?}")));
        }
        let p = k.period();
        let lo = r / 2.0 + params.margin;
        let hi = 1.5 * r - params.margin;
        if hi <= lo {
            return Err(PressureError::EmptySystem(r));
        }
        // η = 2πm − Arg λ, folded so the line is the image height of positive reals.
        let base = -cfg.arg_lambda;
        let m_lo = ((lo - base) / TAU).ceil() as i64;
        let m_hi = ((hi - base) / TAU).floor() as i64;
        let lines: Vec<f64> = (m_lo..=m_hi).map(|m| base + TAU * m as f64).collect();
        if lines.is_empty() {
            return Err(PressureError::EmptySystem(r));
        }
        // ψ must be finite on Q: the branch chain cannot hit 0 there.
        let word = BranchWord::s_then_k(0, k);
        let ln_psi = |z: Complex64| word_log_derivative(cfg, &word, z);
        let grid = square_grid(0.5 * r, 1.5 * r, 0.5 * r, 1.5 * r, params.grid_side);
        let ln_psi_grid: Vec<f64> = grid.iter().map(|&z| ln_psi(z)).collect::<Result<_, _>>()?;
        let (gmin, gmax) = ln_psi_grid
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let distortion = (gmax - gmin).exp();
        // |∇ ln ψ| ≤ Σ_j |∇ ln|input_j|| ≤ Σ_j ∏_{i<j} 1/|input_i| · 1/|input_j|;
        // bounded crudely by p/|z|_min times the first stage, which dominates.
        let z_min = (0.5 * r) * std::f64::consts::SQRT_2;
        let grad = p as f64 / z_min;
        let cell_half_diag = (r / (params.grid_side - 1) as f64) * std::f64::consts::SQRT_2 / 2.0;
        let ln_rho = grad * cell_half_diag;

        let nodes = Self::quadrature(cfg.ln_abs_lambda(), lo, hi, params.xi_step, p);
        let ln_psi_lines: Vec<Vec<f64>> = lines
            .par_iter()
            .map(|&eta| {
                nodes
                    .xi
                    .iter()
                    .map(|&xi| ln_psi(Complex64::new(xi, eta)))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let z_r = Complex64::new(r, r);
        Ok(HairIfs {
            params,
            lambda: cfg.lambda,
            period: p,
            z_r,
            blocks: 2 * lines.len(),
            lines,
            xi_lo: lo,
            xi_hi: hi,
            distortion,
            ln_rho,
            nodes,
            ln_psi_lines,
            ln_psi_grid,
            cfg_word: Some((*cfg, word)),
        })
    }

    /// Composite Simpson nodes on `[lo, hi]` with log-weights.
    fn quadrature(ln_abs_lambda: f64, lo: f64, hi: f64, step: f64, p: usize) -> Quadrature {
        let mut n = ((hi - lo) / step).ceil() as usize;
        n = n.max(2);
        if n % 2 == 1 {
            n += 1;
        }
        let h = (hi - lo) / n as f64;
        let xi: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
        let ln_weights = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                (w * h / 3.0).ln()
            })
            .collect();
        let ln_big_lambda = xi.iter().map(|&x| ln_big_lambda(ln_abs_lambda, x, p)).collect();
        Quadrature { ln_weights, ln_big_lambda, xi }
    }

    /// `ln ψ(z) = ln |G'_{s,k̲}(z)|` (independent of `s`).
    pub fn ln_psi(&self, z: Complex64) -> f64 {
        let (cfg, word) = self.cfg_word.as_ref().expect("built by HairIfs::build");
        word_log_derivative(cfg, word, z).unwrap_or(f64::NAN)
    }

    /// `ln ∫ exp(−eΛ(ξ) + extra(ξ)) dξ` over the window.
    fn ln_integral(&self, excess: f64, extra: Option<&[f64]>) -> f64 {
        let q = &self.nodes;
        let terms = (0..q.xi.len()).map(move |i| {
            let e = -scaled_lambda(excess, q.ln_big_lambda[i]);
            q.ln_weights[i] + e + extra.map_or(0.0, |x| x[i])
        });
        log_sum_exp(terms)
    }

    /// `ln ⟨μ_t, 1⟩ = ln(blocks/2π) + ln ∫ e^{−(t−1)Λ}`.
    pub fn ln_mu_one(&self, t: Exponent) -> f64 {
        (self.blocks as f64 / TAU).ln() + self.ln_integral(t.excess, None)
    }

    /// `ln ⟨μ_t, ψ^t⟩`, which is `P(t)` for the rank-one operator.
    pub fn ln_mu_psi(&self, t: Exponent) -> f64 {
        let tv = t.value();
        let per_line: Vec<f64> = self
            .ln_psi_lines
            .par_iter()
            .map(|row| {
                let extra: Vec<f64> = row.iter().map(|&l| tv * l).collect();
                self.ln_integral(t.excess, Some(&extra))
            })
            .collect();
        // Two blocks per line, density 1/2π in s.
        (2.0 / TAU).ln() + log_sum_exp(per_line.into_iter())
    }

    /// `ln Σ_{(u,s)} |h'_{u,s}(z)|^t = t ln ψ(z) + ln⟨μ_t, 1⟩`.
    pub fn ln_one_level_sum(&self, t: Exponent, z: Complex64) -> f64 {
        t.value() * self.ln_psi(z) + self.ln_mu_one(t)
    }

    pub fn one_level_sum(&self, t: Exponent, z: Complex64) -> f64 {
        self.ln_one_level_sum(t, z).exp()
    }

    /// `ln ln |𝒢|`; `|𝒢| = (blocks/2π)∫ e^{Λ} dξ` is dominated by the top of the window.
    pub fn ln_ln_pairs(&self) -> f64 {
        let ln_top = ln_big_lambda(self.lambda.norm().ln(), self.xi_hi, self.period);
        let q = &self.nodes;
        // ln ∫ e^{Λ} = Λ_max + O(ln Λ_max); return ln of that.
        let ln_int = log_sum_exp((0..q.xi.len()).map(|i| q.ln_weights[i] + q.ln_big_lambda[i].exp()));
        let ln_count = (self.blocks as f64 / TAU).ln() + ln_int;
        if ln_count.is_finite() {
            ln_count.ln()
        } else {
            ln_top
        }
    }

    /// `|𝒢|` when representable.
    pub fn pairs_count(&self) -> Option<f64> {
        let c = self.ln_ln_pairs().exp().exp();
        c.is_finite().then_some(c)
    }

    /// `P(t)` without grid slack.
    pub fn pressure(&self, t: Exponent) -> f64 {
        self.ln_mu_psi(t)
    }
}

impl PressureSystem for HairIfs {
    /// `ln L^n 1(z) = t ln ψ(z) + (n − 1) ln⟨μ, ψ^t⟩ + ln⟨μ, 1⟩`; the lattice
    /// min/max is widened by `t ln ρ`, and the upper bound also by `t ln D`.
    fn pressure_bounds(&self, t: Exponent, n: usize) -> Result<PressureEstimate, PressureError> {
        if n == 0 {
            return Err(PressureError::InvalidParams("depth must be at least 1".into()));
        }
        let tv = t.value();
        let mu_one = self.ln_mu_one(t);
        let mu_psi = if n > 1 { self.ln_mu_psi(t) } else { 0.0 };
        let (gmin, gmax) = self
            .ln_psi_grid
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let nn = n as f64;
        let common = (nn - 1.0) * mu_psi + mu_one;
        let lower = (tv * (gmin - self.ln_rho) + common) / nn;
        let upper = (tv * (gmax + self.ln_rho) + common + tv * self.distortion.ln()) / nn;
        Ok(PressureEstimate { t, lower, upper, level: n })
    }
}

// ---------------------------------------------------------------------------
// Bowen root

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BowenInterval {
    pub a: Exponent,
    pub b: Exponent,
    /// `b − a`, computed on the excesses.
    pub width: f64,
    pub within_tol: bool,
    pub level: usize,
}

impl BowenInterval {
    /// `a > 1` in exact arithmetic on `1 + excess`.
    pub fn certifies_above_one(&self) -> bool {
        self.a.excess > 0.0
    }
}

const WARP: f64 = 1e-300;

/// Bisection coordinate: `asinh(excess / 1e−300)`, relative resolution at every scale.
fn warp(e: f64) -> f64 {
    (e / WARP).asinh()
}

fn unwarp(y: f64) -> f64 {
    if y.abs() < 1.0 {
        WARP * y.sinh()
    } else {
        y.signum() * (y.abs() - std::f64::consts::LN_2 + WARP.ln()).exp() * (1.0 - (-2.0 * y.abs()).exp())
    }
}

/// Last excess in `[lo, hi]` where `pred` holds, given `pred(lo)` and `!pred(hi)`.
fn bisect_excess<F: Fn(f64) -> Result<bool, PressureError>>(lo: f64, hi: f64, pred: F) -> Result<(f64, f64), PressureError> {
    let (mut ylo, mut yhi) = (warp(lo), warp(hi));
    for _ in 0..4000 {
        let mid = 0.5 * (ylo + yhi);
        if mid <= ylo || mid >= yhi {
            break;
        }
        if pred(unwarp(mid))? {
            ylo = mid;
        } else {
            yhi = mid;
        }
    }
    Ok((unwarp(ylo), unwarp(yhi)))
}

/// `[a, b]` with `lower(a) > 0` and `upper(b) < 0`; `a` is pushed as far right
/// and `b` as far left as the sandwich allows.
pub fn bowen_root<S: PressureSystem + ?Sized>(
    sys: &S,
    t_lo: Exponent,
    t_hi: Exponent,
    tol: f64,
    n: usize,
) -> Result<BowenInterval, PressureError> {
    if !(t_lo.excess < t_hi.excess) {
        return Err(PressureError::InvalidParams("t_lo must be below t_hi".into()));
    }
    let lower_lo = sys.pressure_bounds(t_lo, n)?.lower;
    let upper_hi = sys.pressure_bounds(t_hi, n)?.upper;
    if !(lower_lo > 0.0 && upper_hi < 0.0) {
        return Err(PressureError::BracketFailure { lower_lo, upper_hi });
    }
    let (a, _) = bisect_excess(t_lo.excess, t_hi.excess, |e| {
        Ok(sys.pressure_bounds(Exponent::one_plus(e), n)?.lower > 0.0)
    })?;
    let (_, b) = bisect_excess(t_lo.excess, t_hi.excess, |e| {
        Ok(sys.pressure_bounds(Exponent::one_plus(e), n)?.upper >= 0.0)
    })?;
    let width = b - a;
    Ok(BowenInterval {
        a: Exponent::one_plus(a),
        b: Exponent::one_plus(b),
        width,
        within_tol: width <= tol,
        level: n,
    })
}

// ---------------------------------------------------------------------------
// Certification sweep

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub t_lo: f64,
    pub t_hi: f64,
    pub tol: f64,
    pub level: usize,
    pub margin: f64,
    pub grid_side: usize,
    pub xi_step: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { t_lo: 0.9, t_hi: 1.9, tol: 1e-3, level: 3, margin: 1.0, grid_side: 33, xi_step: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyRow {
    pub r: f64,
    pub lines: usize,
    pub blocks: usize,
    pub ln_ln_pairs: f64,
    pub pairs_count: Option<f64>,
    pub sum_t1: f64,
    pub pressure_t1: f64,
    pub distortion: f64,
    pub interval: Option<BowenInterval>,
    pub certified: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub rows: Vec<CertifyRow>,
    /// First `R` whose interval has `a > 1`.
    pub certified_r: Option<f64>,
    /// `a` at that `R`: a lower bound for the hyperbolic dimension.
    pub hyperbolic_dim_lower: Option<Exponent>,
}

/// Builds the system at each `R` and bisects for its Bowen root.
pub fn certify_dim_gt_one(
    cfg: &ExpMapConfig,
    k: &Kneading,
    schedule: &[f64],
    opts: &CertifyOptions,
) -> CertifyReport {
    let mut rows = Vec::with_capacity(schedule.len());
    let mut certified_r = None;
    let mut hyper = None;
    for &r in schedule {
        let params = HairParams { r, margin: opts.margin, grid_side: opts.grid_side, xi_step: opts.xi_step };
        let row = match HairIfs::build(cfg, k, params) {
            Err(e) => CertifyRow {
                r,
                lines: 0,
                blocks: 0,
                ln_ln_pairs: f64::NEG_INFINITY,
                pairs_count: Some(0.0),
                sum_t1: 0.0,
                pressure_t1: f64::NEG_INFINITY,
                distortion: 1.0,
                interval: None,
                certified: false,
                note: Some(e.to_string()),
            },
            Ok(ifs) => {
                let one = Exponent::one_plus(0.0);
                let root = bowen_root(
                    &ifs,
                    Exponent::from_value(opts.t_lo),
                    Exponent::from_value(opts.t_hi),
                    opts.tol,
                    opts.level,
                );
                let (interval, note) = match root {
                    Ok(iv) => (Some(iv), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let certified = interval.map_or(false, |iv| iv.certifies_above_one() && iv.within_tol);
                CertifyRow {
                    r,
                    lines: ifs.lines.len(),
                    blocks: ifs.blocks,
                    ln_ln_pairs: ifs.ln_ln_pairs(),
                    pairs_count: ifs.pairs_count(),
                    sum_t1: ifs.one_level_sum(one, ifs.z_r),
                    pressure_t1: ifs.pressure(one),
                    distortion: ifs.distortion,
                    interval,
                    certified,
                    note,
                }
            }
        };
        if row.certified && certified_r.is_none() {
            certified_r = Some(r);
            hyper = row.interval.map(|iv| iv.a);
        }
        rows.push(row);
    }
    CertifyReport { rows, certified_r, hyperbolic_dim_lower: hyper }
}

/// Image abscissa window of `h_{u,s}` for one `z`, enumerated directly.
///
/// Returns `Σ |h'_{u,s}(z)|^t` over letters `1 ≤ s ≤ s_max` whose image lies in
/// `Re ∈ [xi_lo, xi_hi]`, together with the number of such letters.
pub fn enumerate_block(
    cfg: &ExpMapConfig,
    k: &Kneading,
    z: Complex64,
    u: i64,
    s_range: std::ops::RangeInclusive<i64>,
    xi_lo: f64,
    xi_hi: f64,
    t: f64,
) -> Result<(f64, usize), PressureError> {
    let mut terms = Vec::new();
    for s in s_range {
        let word = BranchWord::s_then_k(u, k).compose(&BranchWord::s_then_k(s, k));
        let y = crate::symbolic::apply_word(cfg, &word, z)?;
        if y.re >= xi_lo && y.re <= xi_hi {
            terms.push(t * word_log_derivative(cfg, &word, z)?);
        }
    }
    let n = terms.len();
    Ok((log_sum_exp(terms.into_iter()).exp(), n))
}

/// `(1/2π)∫_{lo}^{hi} exp(−(t−1)Λ(ξ)) dξ` by Simpson's rule.
pub fn block_integral(ln_abs_lambda: f64, p: usize, lo: f64, hi: f64, t: f64) -> f64 {
    let n = 2000;
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = lo + h * i as f64;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * (-scaled_lambda(t - 1.0, ln_big_lambda(ln_abs_lambda, x, p))).exp();
    }
    acc * h / 3.0 / TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::find_attracting_cycle;
    use crate::symbolic::kneading_sequence;
    use proptest::prelude::*;

    fn minus_five() -> (ExpMapConfig, Kneading) {
        let cfg = ExpMapConfig::new(Complex64::new(-5.0, 0.0)).unwrap();
        let cyc = find_attracting_cycle(&cfg, 8).unwrap();
        (cfg, kneading_sequence(&cyc))
    }

    #[test]
    fn toy_root_is_log3_over_log4() {
        let ifs = ExplicitIfs::toy_three_quarters();
        let exact = 3f64.ln() / 4f64.ln();
        for n in 1..=3 {
            let iv = bowen_root(&ifs, Exponent::from_value(0.5), Exponent::from_value(1.0), 1e-3, n).unwrap();
            assert!(iv.within_tol);
            assert!(iv.a.value() <= exact + 1e-12 && exact - 1e-12 <= iv.b.value(), "{iv:?}");
        }
    }

    #[test]
    fn toy_bounds_do_not_widen_with_depth() {
        let ifs = ExplicitIfs::toy_three_quarters();
        let t = Exponent::from_value(0.7);
        let w = |n| {
            let e = ifs.pressure_bounds(t, n).unwrap();
            e.upper - e.lower
        };
        assert!(w(2) <= w(1) + 1e-12);
        let e = ifs.pressure_bounds(t, 2).unwrap();
        let exact = 3f64.ln() - 0.7 * 4f64.ln();
        assert!((e.lower - exact).abs() < 1e-12 && (e.upper - exact).abs() < 1e-12);
    }

    #[test]
    fn explicit_budget_is_enforced() {
        let ifs = ExplicitIfs::toy_three_quarters();
        // 3^13 > 1e6
        assert!(matches!(ifs.pressure_bounds(Exponent::from_value(1.0), 13), Err(PressureError::Budget { .. })));
    }

    #[test]
    fn tiny_r_is_empty() {
        let (cfg, k) = minus_five();
        assert!(matches!(HairIfs::build(&cfg, &k, HairParams::new(1.0)), Err(PressureError::EmptySystem(_))));
        let rep = certify_dim_gt_one(&cfg, &k, &[1.0], &CertifyOptions::default());
        assert!(rep.certified_r.is_none());
    }

    #[test]
    fn lines_sit_at_odd_multiples_of_pi_for_negative_lambda() {
        let (cfg, k) = minus_five();
        let ifs = HairIfs::build(&cfg, &k, HairParams::new(60.0)).unwrap();
        for &eta in &ifs.lines {
            let m = (eta / PI_F - 1.0) / 2.0;
            assert!((m - m.round()).abs() < 1e-12);
            assert!(eta >= ifs.xi_lo && eta <= ifs.xi_hi);
        }
        assert_eq!(ifs.blocks, 2 * ifs.lines.len());
    }

    const PI_F: f64 = std::f64::consts::PI;

    #[test]
    fn pairs_grow_superexponentially_in_r() {
        let (cfg, k) = minus_five();
        let a = HairIfs::build(&cfg, &k, HairParams::new(40.0)).unwrap();
        let b = HairIfs::build(&cfg, &k, HairParams::new(80.0)).unwrap();
        // ln|G(2R)| − ln|G(R)| ≥ ln 3
        assert!(b.ln_ln_pairs().exp() - a.ln_ln_pairs().exp() >= 3f64.ln());
    }

    #[test]
    fn sum_at_t1_increases_with_r() {
        let (cfg, k) = minus_five();
        let one = Exponent::one_plus(0.0);
        let mut prev = 0.0;
        for r in [50.0, 100.0, 200.0, 400.0] {
            let ifs = HairIfs::build(&cfg, &k, HairParams::new(r)).unwrap();
            let s = ifs.one_level_sum(one, ifs.z_r);
            assert!(s > prev, "R={r}: {s} <= {prev}");
            prev = s;
        }
    }

    #[test]
    fn distortion_stays_bounded() {
        let (cfg, k) = minus_five();
        for r in [50.0, 200.0, 800.0] {
            let ifs = HairIfs::build(&cfg, &k, HairParams::new(r)).unwrap();
            assert!(ifs.distortion > 1.0 && ifs.distortion < 10.0, "R={r}: D={}", ifs.distortion);
        }
    }

    #[test]
    fn pressure_decreases_in_t() {
        let (cfg, k) = minus_five();
        let ifs = HairIfs::build(&cfg, &k, HairParams::new(100.0)).unwrap();
        let ps: Vec<f64> = [-1e-3, -1e-9, 0.0, 1e-9, 1e-3, 0.5]
            .iter()
            .map(|&e| ifs.pressure(Exponent::one_plus(e)))
            .collect();
        for w in ps.windows(2) {
            assert!(w[1] <= w[0], "{ps:?}");
        }
    }

    #[test]
    fn sandwich_contains_pressure() {
        let (cfg, k) = minus_five();
        let ifs = HairIfs::build(&cfg, &k, HairParams::new(100.0)).unwrap();
        // Λ reaches e^{150} at R = 100; keep eΛ of order one.
        let t = Exponent::one_plus(1e-66);
        let p = ifs.pressure(t);
        assert!(p.abs() < 50.0, "{p}");
        for n in 1..=3 {
            let e = ifs.pressure_bounds(t, n).unwrap();
            assert!(e.lower <= p && p <= e.upper, "n={n}: {e:?} vs {p}");
        }
        let w1 = ifs.pressure_bounds(t, 1).unwrap();
        let w3 = ifs.pressure_bounds(t, 3).unwrap();
        assert!(w3.upper - w3.lower < w1.upper - w1.lower);
    }

    #[test]
    fn block_integral_matches_enumeration_at_t1() {
        // Low window where letters can be listed: images of z with u = 0 and
        // s ≥ 1 sit just below Im = π.
        let (cfg, k) = minus_five();
        let z = Complex64::new(30.0, 30.0);
        let (lo, hi) = (0.5, 0.8);
        let (sum, count) = enumerate_block(&cfg, &k, z, 0, 1..=60_000, lo, hi, 1.0).unwrap();
        assert!(count > 1000, "{count}");
        let word = BranchWord::s_then_k(0, &k);
        let psi = word_log_derivative(&cfg, &word, z).unwrap().exp();
        let predicted = psi * block_integral(cfg.ln_abs_lambda(), k.period(), lo, hi, 1.0);
        assert!((sum / predicted - 1.0).abs() < 0.02, "{sum} vs {predicted}");
    }

    #[test]
    fn enumerated_images_return_under_forward_iteration() {
        let (cfg, k) = minus_five();
        let z = Complex64::new(30.0, 30.0);
        for s in [1i64, 17, 5000, -3, -4000] {
            let word = BranchWord::s_then_k(0, &k).compose(&BranchWord::s_then_k(s, &k));
            let y = crate::symbolic::apply_word(&cfg, &word, z).unwrap();
            let mut w = y;
            for _ in 0..2 * k.period() {
                w = crate::dynamics::apply(&cfg, w);
            }
            assert!((w - z).norm() < 1e-6 * z.norm(), "s={s}: {w} vs {z}");
        }
    }

    #[test]
    #[ignore]
    fn print_certify_table() {
        let (cfg, k) = minus_five();
        let rep = certify_dim_gt_one(&cfg, &k, &[10.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0], &CertifyOptions::default());
        for r in &rep.rows {
            println!("{:?}", r);
        }
    }

    #[test]
    fn warp_round_trips() {
        for e in [-0.9, -1e-3, -1e-200, 0.0, 1e-300, 1e-150, 0.25, 0.9] {
            let back = unwarp(warp(e));
            assert!((back - e).abs() <= 1e-12 * e.abs().max(1e-300), "{e} -> {back}");
        }
    }

    proptest! {
        #[test]
        fn ln_big_lambda_increases_in_xi(x in 0.5f64..400.0, dx in 1e-3f64..5.0) {
            let a = ln_big_lambda(5f64.ln(), x, 2);
            let b = ln_big_lambda(5f64.ln(), x + dx, 2);
            prop_assert!(b >= a);
        }

        #[test]
        fn toy_pressure_is_affine(t in 0.1f64..2.0) {
            let ifs = ExplicitIfs::toy_three_quarters();
            let e = ifs.pressure_bounds(Exponent::from_value(t), 1).unwrap();
            let exact = 3f64.ln() - t * 4f64.ln();
            prop_assert!((e.lower - exact).abs() < 1e-12);
        }
    }
}
