//! Cell covers of the points of `W_M = {Re z ≥ M}` whose orbits return to `W_M`
//! every `p` steps, and the series majorant for their `(1+δ)`-sums.
//!
//! Cells are stored as a center plus boundary offsets. Pulling a cell back
//! through `g_l` maps the center by the principal branch and each offset by
//! `log(1 + δ/c)`, which follows the branch continuously across the cut and
//! keeps full relative precision for cells far smaller than their distance
//! from the origin.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cmath::{log1p, plog};
use crate::dynamics::ExpMapConfig;
use crate::symbolic::{inverse_branch, BranchWord, Kneading, StripIndex, SymbolicError};

/// Upper bound on the diameter of a level-0 cell, `√(1 + 16π²)`.
pub fn d_const() -> f64 {
    (1.0 + 16.0 * PI * PI).sqrt()
}

/// Largest `M` tried by [`find_min_m`].
pub const M_SEARCH_CAP: f64 = 1e13;

/// Letters beyond this modulus are not enumerated: `2πs` would lose integer precision.
const ANCHOR_LIMIT: f64 = (1u64 << 50) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error("invalid cover parameters: {0}")]
    InvalidParams(String),
    #[error("no admissible M up to {0:e}")]
    NotFound(f64),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverParams {
    pub m: f64,
    pub delta: f64,
    pub depth: usize,
    pub s_max: i64,
    pub r_max: i64,
    pub samples_per_cell: usize,
}

impl CoverParams {
    /// Defaults: `s_max = 64`, `r_max = ⌈M⌉ + 64`, 256 boundary samples.
    pub fn new(m: f64, delta: f64, depth: usize) -> Self {
        CoverParams {
            m,
            delta,
            depth,
            s_max: 64,
            r_max: m.ceil() as i64 + 64,
            samples_per_cell: 256,
        }
    }

    pub fn validate(&self) -> Result<(), CoverError> {
        let d = d_const();
        if !(self.m.is_finite() && self.m > d + 1.0) {
            return Err(CoverError::InvalidParams(format!("M = {} must exceed d + 1 = {}", self.m, d + 1.0)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(CoverError::InvalidParams(format!("delta = {} must lie in (0, 1]", self.delta)));
        }
        if self.s_max < 8 || self.r_max < 8 {
            return Err(CoverError::InvalidParams("s_max and r_max must be at least 8".into()));
        }
        if self.r_max < self.m.ceil() as i64 {
            return Err(CoverError::InvalidParams("r_max must be at least ceil(M)".into()));
        }
        if self.samples_per_cell < 8 {
            return Err(CoverError::InvalidParams("samples_per_cell must be at least 8".into()));
        }
        Ok(())
    }

    pub fn r_min(&self) -> i64 {
        self.m.ceil() as i64
    }

    /// Boundary spacing of the level-0 boxes.
    pub fn sample_spacing(&self) -> f64 {
        (2.0 + 4.0 * PI) / self.samples_per_cell as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverCell {
    pub level: usize,
    /// Composition taking the level-0 cell onto this one.
    pub word: BranchWord,
    /// `(r, component)` of the level-0 ancestor.
    pub base: (i64, usize),
    pub center: Complex64,
    /// Boundary samples relative to `center`, in boundary order.
    pub offsets: Vec<Complex64>,
    /// Upper bound on `|word'|` over the samples.
    pub lip: f64,
    /// Sample diameter inflated by `1 + 2·lip·h`.
    pub diam: f64,
}

impl CoverCell {
    pub fn points(&self) -> Vec<Complex64> {
        self.offsets.iter().map(|&o| self.center + o).collect()
    }

    pub fn max_re(&self) -> f64 {
        self.offsets.iter().map(|o| self.center.re + o.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Even-odd test against the boundary polygon.
    pub fn hull_contains(&self, z: Complex64) -> bool {
        self.hull_contains_offset(z - self.center)
    }

    /// [`CoverCell::hull_contains`] for a point given relative to `center`.
    pub fn hull_contains_offset(&self, q: Complex64) -> bool {
        let n = self.offsets.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.offsets[i];
            let b = self.offsets[(i + 1) % n];
            if (a.im > q.im) != (b.im > q.im) {
                let x = a.re + (q.im - a.im) * (b.re - a.re) / (b.im - a.im);
                if q.re < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn sample_diameter(offsets: &[Complex64]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in offsets.iter().enumerate() {
        for b in &offsets[i + 1..] {
            best = best.max((a - b).norm_sqr());
        }
    }
    best.sqrt()
}

fn finish_cell(
    level: usize,
    word: BranchWord,
    base: (i64, usize),
    center: Complex64,
    offsets: Vec<Complex64>,
    lip: f64,
    h: f64,
) -> CoverCell {
    let diam = sample_diameter(&offsets) * (1.0 + 2.0 * lip * h);
    CoverCell { level, word, base, center, offsets, lip, diam }
}

/// One box `[r, r+1) × (2πk₁ − π, 2πk₁ + π]` per `r = ⌈M⌉ … r_max`.
pub fn level0_cells(k: &Kneading, params: &CoverParams) -> Result<Vec<CoverCell>, CoverError> {
    params.validate()?;
    let k1 = *k.0.first().ok_or_else(|| CoverError::InvalidParams("period must exceed 1".into()))?;
    let y0 = TAU * k1 as f64;
    let n = params.samples_per_cell;
    let perimeter = 2.0 + 4.0 * PI;
    let offsets: Vec<Complex64> = (0..n)
        .map(|i| {
            // Counter-clockwise from the lower-left corner, relative to the box center.
            let t = perimeter * i as f64 / n as f64;
            if t < 1.0 {
                Complex64::new(t - 0.5, -PI)
            } else if t < 1.0 + TAU {
                Complex64::new(0.5, -PI + (t - 1.0))
            } else if t < 2.0 + TAU {
                Complex64::new(0.5 - (t - 1.0 - TAU), PI)
            } else {
                Complex64::new(-0.5, PI - (t - 2.0 - TAU))
            }
        })
        .collect();
    let h = params.sample_spacing();
    Ok((params.r_min()..=params.r_max)
        .map(|r| {
            let center = Complex64::new(r as f64 + 0.5, y0);
            finish_cell(0, BranchWord(vec![]), (r, 0), center, offsets.clone(), 1.0, h)
        })
        .collect())
}

/// Pulls one cell back through a single branch `g_s`, following the branch
/// continuously from the center image.
fn pull_stage(
    cfg: &ExpMapConfig,
    s: StripIndex,
    center: Complex64,
    offsets: &[Complex64],
) -> Result<(Complex64, Vec<Complex64>, f64), SymbolicError> {
    let new_center = inverse_branch(cfg, s, center)?;
    let mut max_factor = 0.0f64;
    let mut out = Vec::with_capacity(offsets.len());
    for &o in offsets {
        let z = center + o;
        if z == Complex64::new(0.0, 0.0) {
            return Err(SymbolicError::ZeroArgument);
        }
        max_factor = max_factor.max(1.0 / z.norm());
        let u = o / center;
        let off = if u.norm() < 0.5 {
            log1p(u)
        } else {
            let mut w = plog(z / cfg.lambda) + Complex64::new(0.0, TAU * s as f64) - new_center;
            w.im -= TAU * (w.im / TAU).round();
            w
        };
        out.push(off);
    }
    Ok((new_center, out, max_factor))
}

/// Image of a cell under `G_{k̲,s}`, without the `W_M` test.
pub fn pull_back(
    cfg: &ExpMapConfig,
    k: &Kneading,
    s: StripIndex,
    cell: &CoverCell,
    h: f64,
) -> Result<CoverCell, SymbolicError> {
    let letters = BranchWord::k_then_s(k, s);
    let mut center = cell.center;
    let mut offsets = cell.offsets.clone();
    let mut lip = cell.lip;
    for &l in letters.0.iter().rev() {
        let (c, o, f) = pull_stage(cfg, l, center, &offsets)?;
        center = c;
        offsets = o;
        lip *= f;
    }
    Ok(finish_cell(cell.level + 1, letters.compose(&cell.word), cell.base, center, offsets, lip, h))
}

/// Re of the center image under `G_{k̲,s}`.
fn center_image_re(cfg: &ExpMapConfig, k: &Kneading, s: StripIndex, c: Complex64) -> Option<f64> {
    let word = BranchWord::k_then_s(k, s);
    crate::symbolic::apply_word(cfg, &word, c).ok().map(|w| w.re)
}

/// Least `|s|` (with the given sign) whose center image reaches `Re ≥ target`,
/// or `None` if that letter is beyond [`ANCHOR_LIMIT`].
fn anchor_letter(cfg: &ExpMapConfig, k: &Kneading, sign: i64, c: Complex64, target: f64) -> Option<i64> {
    let reaches = |a: i64| center_image_re(cfg, k, sign * a, c).map_or(false, |re| re >= target);
    let mut hi: i64 = 1;
    while !reaches(hi) {
        if hi as f64 > ANCHOR_LIMIT {
            return None;
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    if lo == 0 || reaches(lo) {
        return Some(lo.max(1));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Letters examined for one parent: `|s| ≤ s_max`, plus for each sign a run of
/// `s_max` letters starting just below the first letter whose image meets `W_M`,
/// when that letter is representable.
pub fn examined_letters(cfg: &ExpMapConfig, k: &Kneading, params: &CoverParams, cell: &CoverCell) -> Vec<StripIndex> {
    let mut letters: Vec<StripIndex> = (-params.s_max..=params.s_max).collect();
    for sign in [1i64, -1] {
        if let Some(a) = anchor_letter(cfg, k, sign, cell.center, params.m) {
            let start = a.saturating_sub(2).max(params.s_max + 1);
            letters.extend((start..start + params.s_max).map(|x| sign * x));
        }
    }
    letters.sort_unstable();
    letters.dedup();
    letters
}

/// Level-`n+1` cells: pull-backs of each cell that still meet `W_M`.
pub fn refine(
    cfg: &ExpMapConfig,
    k: &Kneading,
    params: &CoverParams,
    cells: &[CoverCell],
) -> Result<Vec<CoverCell>, CoverError> {
    params.validate()?;
    let h = params.sample_spacing();
    let per_cell: Vec<Result<Vec<CoverCell>, SymbolicError>> = cells
        .par_iter()
        .map(|cell| {
            let mut out = Vec::new();
            for s in examined_letters(cfg, k, params, cell) {
                let child = pull_back(cfg, k, s, cell, h)?;
                if child.max_re() >= params.m {
                    out.push(child);
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_cell {
        out.extend(r?);
    }
    Ok(out)
}

/// `Σ_{r ≥ m} r^{−(1+δ)} ≤ m^{−(1+δ)} + m^{−δ}/δ`.
pub fn r_series_bound(m: f64, delta: f64) -> f64 {
    m.powf(-(1.0 + delta)) + m.powf(-delta) / delta
}

/// `Σ_{s=1}^{n} (πs+1)^{−(1+δ)}`.
fn s_partial(delta: f64, n: i64) -> f64 {
    (1..=n).map(|s| (PI * s as f64 + 1.0).powf(-(1.0 + delta))).sum()
}

const S_TERMS: i64 = 1_000_000;

/// `S(δ) = 1 + 2Σ_{s≥1}(πs+1)^{−(1+δ)}`, with the integral bound for the tail.
pub fn s_series(delta: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    if delta <= 0.0 {
        return f64::INFINITY;
    }
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&v) = cache.lock().unwrap().get(&delta.to_bits()) {
        return v;
    }
    let tail = (PI * S_TERMS as f64 + 1.0).powf(-delta) / (PI * delta);
    let v = 1.0 + 2.0 * (s_partial(delta, S_TERMS) + tail);
    cache.lock().unwrap().insert(delta.to_bits(), v);
    v
}

/// `p · d^{1+δ} · T_r(M, δ) · (M − d)^{−(1+δ)(n−1)} · S(δ)^n`.
pub fn analytic_bound(p: usize, m: f64, delta: f64, n: usize) -> Result<f64, CoverError> {
    analytic_bound_with_s(p, m, delta, n, s_series(delta))
}

fn analytic_bound_with_s(p: usize, m: f64, delta: f64, n: usize, s: f64) -> Result<f64, CoverError> {
    let d = d_const();
    if !(m > d + 1.0) || !(delta > 0.0 && delta <= 1.0) || n < 1 {
        return Err(CoverError::InvalidParams(format!(
            "analytic bound needs M > d + 1, delta in (0, 1], n >= 1 (got M = {m}, delta = {delta}, n = {n})"
        )));
    }
    let a = 1.0 + delta;
    let log = (p as f64).ln() + a * d.ln() + r_series_bound(m, delta).ln()
        - a * (n as f64 - 1.0) * (m - d).ln()
        + n as f64 * s.ln();
    Ok(log.exp())
}

/// Least `M` on the grid `d + 1 + k/2`, `k ≥ 1`, with the bound below 1 for all
/// `n ≤ n_max` and `S(δ)(M − d)^{−(1+δ)} < 1`.
pub fn find_min_m(p: usize, delta: f64, n_max: usize) -> Result<f64, CoverError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CoverError::InvalidParams(format!("delta = {delta} must lie in (0, 1]")));
    }
    let d = d_const();
    let s = s_series(delta);
    let grid = |k: u64| d + 1.0 + 0.5 * k as f64;
    let ok = |k: u64| {
        let m = grid(k);
        s * (m - d).powf(-(1.0 + delta)) < 1.0
            && (1..=n_max.max(1)).all(|n| analytic_bound_with_s(p, m, delta, n, s).map_or(false, |b| b < 1.0))
    };
    let mut hi: u64 = 1;
    while !ok(hi) {
        if grid(hi) > M_SEARCH_CAP {
            return Err(CoverError::NotFound(M_SEARCH_CAP));
        }
        hi *= 2;
    }
    if hi == 1 {
        return Ok(grid(1));
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(grid(hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverSum {
    pub level: usize,
    pub cells: usize,
    pub direct: f64,
    pub tail: f64,
    pub tail_infinite: bool,
}

impl CoverSum {
    pub fn total(&self) -> f64 {
        if self.tail_infinite {
            f64::INFINITY
        } else {
            self.direct + self.tail
        }
    }
}

/// `Σ_K (diam K)^{1+δ}` over the given level-`n` cells, plus a majorant for
/// everything the truncations `r ≤ r_max`, `|s| ≤ s_max` left out.
///
/// The tail charges every letter outside the central window, including those
/// that anchored windows did enumerate, so it never undercounts. At level 0
/// infinitely many boxes are omitted and the tail is infinite.
pub fn cover_sum(cells: &[CoverCell], params: &CoverParams, level: usize) -> CoverSum {
    let delta = params.delta;
    let a = 1.0 + delta;
    let mut terms: Vec<f64> = cells.iter().map(|c| c.diam.powf(a)).collect();
    terms.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let direct: f64 = terms.iter().fold(0.0, |a, b| a + b);
    if level == 0 || delta <= 0.0 {
        return CoverSum { level, cells: cells.len(), direct, tail: f64::INFINITY, tail_infinite: true };
    }
    let d = d_const();
    let s = s_series(delta);
    let s_in = 1.0 + 2.0 * s_partial(delta, params.s_max);
    let r_in: f64 = (params.r_min()..=params.r_max).map(|r| (r as f64).powf(-a)).sum();
    let r_out = r_series_bound((params.r_max + 1) as f64, delta);
    let n = level as f64;
    let q = (params.m - d).powf(-a * (n - 1.0));
    let tail = d.powf(a) * q * (r_out * s.powf(n) + r_in * (s.powf(n) - s_in.powf(n)));
    CoverSum { level, cells: cells.len(), direct, tail, tail_infinite: false }
}

/// Cells level by level up to `params.depth`, with their sums.
pub fn build_cover(
    cfg: &ExpMapConfig,
    k: &Kneading,
    params: &CoverParams,
) -> Result<Vec<(Vec<CoverCell>, CoverSum)>, CoverError> {
    let mut cells = level0_cells(k, params)?;
    let mut out = Vec::with_capacity(params.depth + 1);
    for level in 0..=params.depth {
        let sum = cover_sum(&cells, params, level);
        let next = if level < params.depth { refine(cfg, k, params, &cells)? } else { Vec::new() };
        out.push((std::mem::replace(&mut cells, next), sum));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::apply;
    use crate::symbolic::{apply_word, word_derivative_modulus};

    fn minus_five() -> ExpMapConfig {
        ExpMapConfig::new(Complex64::new(-5.0, 0.0)).unwrap()
    }

    fn k0() -> Kneading {
        Kneading(vec![0])
    }

    // Hurwitz-zeta values 1 + 2π^{−a} ζ(a, 1 + 1/π), a = 1 + δ, at 30 digits.
    const S_ORACLE: [(f64, f64); 3] = [
        (0.25, 2.979_543_470_957_261_9),
        (0.5, 1.765_308_149_422_721_1),
        (1.0, 1.225_481_221_979_408_5),
    ];

    #[test]
    fn s_series_matches_hurwitz_zeta() {
        for (delta, want) in S_ORACLE {
            let got = s_series(delta);
            assert!((got - want).abs() < 1e-7 * want, "delta {delta}: {got} vs {want}");
            // Tail bound makes the value an upper estimate.
            assert!(got >= want - 1e-12);
        }
        assert!(s_series(0.0).is_infinite());
    }

    #[test]
    fn params_validation() {
        assert!(CoverParams::new(d_const() + 1.0, 0.5, 1).validate().is_err());
        assert!(CoverParams::new(20.0, 0.0, 1).validate().is_err());
        assert!(CoverParams::new(20.0, 1.5, 1).validate().is_err());
        let mut p = CoverParams::new(20.0, 0.5, 1);
        p.s_max = 4;
        assert!(p.validate().is_err());
        assert!(CoverParams::new(20.0, 0.5, 1).validate().is_ok());
    }

    #[test]
    fn level0_geometry() {
        let mut params = CoverParams::new(14.0, 1.0, 0);
        params.r_max = 16;
        let cells = level0_cells(&k0(), &params).unwrap();
        assert_eq!(cells.len(), 3);
        let raw = (1.0 + TAU * TAU).sqrt();
        for c in &cells {
            assert!(c.diam < d_const());
            assert!(c.diam >= raw * 0.999);
            assert!(c.diam <= raw * (1.0 + 2.0 * params.sample_spacing()) + 1e-12);
            for z in c.points() {
                assert!(z.im >= -TAU && z.im <= TAU);
                assert!(z.re >= c.base.0 as f64 && z.re <= c.base.0 as f64 + 1.0);
            }
        }
        let (a, b) = (cells[0].points(), cells[2].points());
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn level0_follows_kneading_strip() {
        let params = CoverParams::new(14.0, 1.0, 0);
        let cells = level0_cells(&Kneading(vec![3]), &params).unwrap();
        assert!((cells[0].center.im - 6.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn analytic_bound_is_decreasing_in_m() {
        for &delta in &[0.25, 0.5, 1.0] {
            for n in 1..5 {
                let mut prev = f64::INFINITY;
                for i in 0..40 {
                    let m = d_const() + 1.5 + 10.0 * i as f64;
                    let b = analytic_bound(2, m, delta, n).unwrap();
                    assert!(b < prev);
                    prev = b;
                }
            }
        }
        assert!(analytic_bound(2, 20.0, 0.5, 0).is_err());
        assert!(analytic_bound(2, 5.0, 0.5, 1).is_err());
    }

    #[test]
    fn min_m_matches_grid_oracle() {
        // Grid index k with M = d + 1 + k/2, from a 30-digit scan of the same majorant.
        let d = d_const();
        for (delta, k) in [(1.0, 754u64), (0.5, 199_747), (0.25, 205_537_937_627)] {
            let m = find_min_m(2, delta, 50).unwrap();
            assert!((m - (d + 1.0 + 0.5 * k as f64)).abs() < 1e-6 * m, "delta {delta}: {m}");
            assert!(analytic_bound(2, m, delta, 1).unwrap() < 1.0);
            let below = m - 0.5;
            let fails = s_series(delta) * (below - d).powf(-(1.0 + delta)) >= 1.0
                || (1..=50).any(|n| analytic_bound(2, below, delta, n).unwrap() >= 1.0);
            assert!(fails);
        }
    }

    #[test]
    fn single_cell_sum_is_arithmetic() {
        let params = CoverParams::new(20.0, 1.0, 1);
        let cell = CoverCell {
            level: 1,
            word: BranchWord(vec![0, 1]),
            base: (20, 0),
            center: Complex64::new(20.0, 0.0),
            offsets: vec![Complex64::new(0.25, 0.0), Complex64::new(-0.25, 0.0)],
            lip: 0.0,
            diam: 0.5,
        };
        let sum = cover_sum(&[cell], &params, 1);
        assert!((sum.direct - 0.25).abs() < 1e-15);
        assert!(sum.tail > 0.0 && !sum.tail_infinite);
    }

    #[test]
    fn level0_tail_is_infinite() {
        let params = CoverParams::new(20.0, 1.0, 0);
        let cells = level0_cells(&k0(), &params).unwrap();
        let sum = cover_sum(&cells, &params, 0);
        assert!(sum.tail_infinite && sum.total().is_infinite());
    }

    #[test]
    fn nonpositive_delta_flags_infinite_tail() {
        let mut params = CoverParams::new(20.0, 1.0, 1);
        params.delta = 0.0;
        assert!(cover_sum(&[], &params, 1).tail_infinite);
    }

    fn small_params(m: f64) -> CoverParams {
        let mut p = CoverParams::new(m, 1.0, 2);
        p.s_max = 8;
        p.r_max = m.ceil() as i64 + 2;
        p.samples_per_cell = 64;
        p
    }

    #[test]
    fn central_window_does_not_reach_w_m() {
        // Re G_{k,s}(z) ≈ ln(2π|s|/5): letters |s| ≤ 64 land far left of M = 20.
        let cfg = minus_five();
        let params = CoverParams::new(20.0, 1.0, 1);
        let cells = level0_cells(&k0(), &params).unwrap();
        let h = params.sample_spacing();
        for s in -params.s_max..=params.s_max {
            let child = pull_back(&cfg, &k0(), s, &cells[0], h).unwrap();
            assert!(child.max_re() < params.m);
        }
    }

    #[test]
    fn refine_keeps_only_cells_meeting_w_m() {
        let cfg = minus_five();
        let params = small_params(14.5);
        let l0 = level0_cells(&k0(), &params).unwrap();
        let l1 = refine(&cfg, &k0(), &params, &l0).unwrap();
        assert!(!l1.is_empty());
        for c in &l1 {
            assert_eq!(c.level, 1);
            assert!(c.max_re() >= params.m);
            assert!(c.word.0[1].abs() > params.s_max);
        }
    }

    #[test]
    fn refined_diameters_contract() {
        let cfg = minus_five();
        let params = small_params(14.5);
        let l0 = level0_cells(&k0(), &params).unwrap();
        let l1 = refine(&cfg, &k0(), &params, &l0).unwrap();
        let l2 = refine(&cfg, &k0(), &params, &l1[..4]).unwrap();
        for (children, parents) in [(&l1, &l0), (&l2, &l1)] {
            for c in children.iter() {
                let parent = parents.iter().find(|p| c.word.0[2..] == p.word.0[..] && c.base == p.base).unwrap();
                assert!(c.diam < parent.diam / (params.m - parent.diam).max(1e-300));
            }
        }
    }

    #[test]
    fn sup_diameter_decreases_with_level() {
        let cfg = minus_five();
        let params = small_params(14.5);
        let mut cells = level0_cells(&k0(), &params).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..=4 {
            let sup = cells.iter().map(|c| c.diam).fold(0.0, f64::max);
            assert!(sup < prev, "{sup} !< {prev}");
            prev = sup;
            // Deeper levels grow by ~2·s_max per parent; follow the first three.
            let parents: Vec<_> = cells.iter().take(3).cloned().collect();
            cells = refine(&cfg, &k0(), &params, &parents).unwrap();
        }
    }

    #[test]
    fn children_map_onto_parent_samples() {
        let cfg = minus_five();
        let params = small_params(14.5);
        let l0 = level0_cells(&k0(), &params).unwrap();
        let l1 = refine(&cfg, &k0(), &params, &l0[..1]).unwrap();
        for c in l1.iter().take(5) {
            for (z, parent) in c.points().iter().zip(l0[0].points()) {
                let back = apply(&cfg, apply(&cfg, *z));
                assert!((back - parent).norm() < 1e-6 * parent.norm(), "{back} vs {parent}");
            }
        }
    }

    #[test]
    fn backward_orbits_land_in_cell_hulls() {
        let cfg = minus_five();
        let params = small_params(14.5);
        let h = params.sample_spacing();
        let l0 = level0_cells(&k0(), &params).unwrap();
        let l1 = refine(&cfg, &k0(), &params, &l0[..1]).unwrap();
        let l2 = refine(&cfg, &k0(), &params, &l1[..2]).unwrap();
        let seed = Complex64::new(0.21, -1.3);
        assert!(l0[0].hull_contains_offset(seed));
        // Level-1 cells are resolvable in absolute coordinates.
        for c in &l1 {
            let z = apply_word(&cfg, &c.word, l0[0].center + seed).unwrap();
            assert!(c.hull_contains(z), "word {:?}", c.word);
        }
        // Level-2 cells sit below the ulp of their position: carry the probe as an offset.
        for c in &l2 {
            let mut probe = CoverCell { offsets: vec![seed], ..l0[0].clone() };
            for pair in c.word.0.chunks(2).rev() {
                probe = pull_back(&cfg, &k0(), pair[1], &probe, h).unwrap();
            }
            assert_eq!(probe.center, c.center);
            assert!(c.hull_contains_offset(probe.offsets[0]), "word {:?}", c.word);
        }
    }

    #[test]
    fn level_one_derivatives_obey_cell_bound() {
        let cfg = minus_five();
        let mut params = small_params(30.0);
        params.r_max = 31;
        let l0 = level0_cells(&k0(), &params).unwrap();
        let l1 = refine(&cfg, &k0(), &params, &l0[..1]).unwrap();
        assert!(!l1.is_empty());
        let d = d_const();
        for c in l1.iter().take(4) {
            for z in c.points() {
                for s in -50i64..=50 {
                    let w = word_derivative_modulus(&cfg, &BranchWord::k_then_s(&k0(), s), z).unwrap();
                    assert!(w < 1.0 / ((params.m - d) * (PI * s.abs() as f64 + 1.0)));
                }
            }
        }
    }

    #[test]
    fn level_one_sum_dominated_at_admissible_m() {
        let cfg = minus_five();
        let m = find_min_m(2, 1.0, 50).unwrap();
        let params = CoverParams::new(m, 1.0, 2);
        let levels = build_cover(&cfg, &k0(), &params).unwrap();
        for (_, sum) in levels.iter().skip(1) {
            let bound = analytic_bound(2, m, 1.0, sum.level).unwrap();
            assert!(sum.total() <= bound && bound < 1.0);
        }
    }
}
