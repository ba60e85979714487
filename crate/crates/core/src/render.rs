//! Pixel classification of the plane and box counting on pixel sets.
//!
//! Row 0 is the top of the window (`y_max`), column 0 the left edge.
//! Pixel centers are classified, never corners.

use std::collections::VecDeque;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{classify_point, AttractingCycle, ExpMapConfig, PointClass};
use crate::symbolic::{itinerary, matches_sigma, Kneading};

pub const MIN_SIDE: usize = 16;
pub const MIN_BOX_POINTS: usize = 1000;
pub const DEFAULT_SCALES: [usize; 6] = [1, 2, 4, 8, 16, 32];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("box counting needs at least {MIN_BOX_POINTS} points and 4 scales over 2 octaves: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, width: usize, height: usize) -> Result<Self, RenderError> {
        let spec = GridSpec { x_min, x_max, y_min, y_max, width, height };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(RenderError::InvalidGrid(format!("window {self:?}")));
        }
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return Err(RenderError::InvalidGrid(format!("{}x{} below {MIN_SIDE}", self.width, self.height)));
        }
        Ok(())
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> Complex64 {
        let dx = (self.x_max - self.x_min) / self.width as f64;
        let dy = (self.y_max - self.y_min) / self.height as f64;
        Complex64::new(self.x_min + (col as f64 + 0.5) * dx, self.y_max - (row as f64 + 0.5) * dy)
    }

    /// Pixel whose cell contains `z`, if inside the window.
    pub fn pixel_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let u = (z.re - self.x_min) / (self.x_max - self.x_min) * self.width as f64;
        let v = (self.y_max - z.im) / (self.y_max - self.y_min) * self.height as f64;
        (u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64).then(|| (u as usize, v as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassGrid {
    pub spec: GridSpec,
    pub period: usize,
    /// Row-major, `height × width`.
    pub cells: Vec<PointClass>,
    /// Canonical description of everything the cells depend on.
    pub provenance: String,
}

impl ClassGrid {
    pub fn get(&self, col: usize, row: usize) -> PointClass {
        self.cells[row * self.spec.width + col]
    }

    pub fn undecided_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| matches!(c, PointClass::Undecided)).count() as f64 / self.cells.len() as f64
    }

    /// Pixel counts: one per phase, then escaped, then undecided.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.period + 2];
        for c in &self.cells {
            match *c {
                PointClass::Attracted { phase, .. } => h[phase] += 1,
                PointClass::Escaped { .. } => h[self.period] += 1,
                PointClass::Undecided => h[self.period + 1] += 1,
            }
        }
        h
    }

    /// Gray level per tag: phases spread over `0..=160`, undecided 200, escaped 255.
    pub fn gray(&self, c: PointClass) -> u8 {
        match c {
            PointClass::Attracted { phase, .. } => {
                if self.period <= 1 {
                    0
                } else {
                    (phase * 160 / (self.period - 1)) as u8
                }
            }
            PointClass::Undecided => 200,
            PointClass::Escaped { .. } => 255,
        }
    }

    pub fn gray_bytes(&self) -> Vec<u8> {
        self.cells.iter().map(|&c| self.gray(c)).collect()
    }

    /// Canonical byte encoding: tag byte, then the little-endian `u32` payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.cells.len() * 5);
        for c in &self.cells {
            let (tag, val) = match *c {
                PointClass::Attracted { phase, steps } => (phase as u32, steps),
                PointClass::Escaped { steps } => (u32::MAX - 1, steps),
                PointClass::Undecided => (u32::MAX, 0),
            };
            out.extend_from_slice(&tag.to_le_bytes());
            out.extend_from_slice(&val.to_le_bytes());
        }
        out
    }
}

/// Classifies every pixel center; rows are processed in parallel.
pub fn render_grid(cfg: &ExpMapConfig, cycle: &AttractingCycle, spec: &GridSpec) -> Result<ClassGrid, RenderError> {
    spec.validate()?;
    let cells: Vec<PointClass> = (0..spec.height)
        .into_par_iter()
        .flat_map_iter(|row| (0..spec.width).map(move |col| classify_point(cfg, cycle, spec.pixel_center(col, row))))
        .collect();
    let provenance = format!(
        "lambda={:e},{:e};max_iter={};escape_re={:e};attract_tol={:e};window={:e},{:e},{:e},{:e};size={}x{};capture={:e}",
        cfg.lambda.re,
        cfg.lambda.im,
        cfg.max_iter,
        cfg.escape_re,
        cfg.attract_tol,
        spec.x_min,
        spec.x_max,
        spec.y_min,
        spec.y_max,
        spec.width,
        spec.height,
        cycle.capture_radius()
    );
    Ok(ClassGrid { spec: *spec, period: cycle.period, cells, provenance })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl PixelMask {
    pub fn empty(width: usize, height: usize) -> Self {
        PixelMask { width, height, bits: vec![false; width * height] }
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize) {
        self.bits[row * self.width + col] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &PixelMask) -> PixelMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        PixelMask { width: self.width, height: self.height, bits }
    }

    /// `(col, row)` of set pixels in row-major order.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }
}

fn neighbours4(col: usize, row: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let c = col as isize;
    let r = row as isize;
    [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
        .into_iter()
        .filter(move |&(x, y)| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h)
        .map(|(x, y)| (x as usize, y as usize))
}

fn is_phase(c: PointClass, phase: usize) -> bool {
    matches!(c, PointClass::Attracted { phase: q, .. } if q == phase)
}

/// Boundary of a membership predicate: members with a 4-neighbour outside.
/// Frame pixels never count; their outside neighbour is unknown.
fn boundary_of(w: usize, h: usize, member: impl Fn(usize, usize) -> bool + Sync) -> PixelMask {
    let bits: Vec<bool> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            let member = &member;
            (0..w).map(move |col| {
                let frame = col == 0 || row == 0 || col + 1 == w || row + 1 == h;
                !frame && member(col, row) && neighbours4(col, row, w, h).any(|(x, y)| !member(x, y))
            })
        })
        .collect();
    PixelMask { width: w, height: h, bits }
}

/// Phase pixels with a 4-neighbour of another tag; undecided neighbours differ.
pub fn extract_boundary(grid: &ClassGrid, phase: usize) -> PixelMask {
    let (w, h) = (grid.spec.width, grid.spec.height);
    boundary_of(w, h, |c, r| is_phase(grid.get(c, r), phase))
}

/// Pixel nearest `target` among those of `phase`, searched in the row nearest `target`.
pub fn component_seed(grid: &ClassGrid, phase: usize, target: Complex64) -> Option<(usize, usize)> {
    let s = &grid.spec;
    let dy = (s.y_max - s.y_min) / s.height as f64;
    let row = ((s.y_max - target.im) / dy - 0.5).round().clamp(0.0, (s.height - 1) as f64) as usize;
    (0..s.width)
        .filter(|&c| is_phase(grid.get(c, row), phase))
        .min_by(|&a, &b| {
            let da = (s.pixel_center(a, row) - target).norm();
            let db = (s.pixel_center(b, row) - target).norm();
            da.total_cmp(&db)
        })
        .map(|c| (c, row))
}

/// The 4-connected component of same-phase pixels containing `seed`.
pub fn component_mask(grid: &ClassGrid, seed: (usize, usize)) -> PixelMask {
    let (w, h) = (grid.spec.width, grid.spec.height);
    let mut mask = PixelMask::empty(w, h);
    let phase = match grid.get(seed.0, seed.1) {
        PointClass::Attracted { phase, .. } => phase,
        _ => return mask,
    };
    let mut queue = VecDeque::from([seed]);
    mask.set(seed.0, seed.1);
    while let Some((c, r)) = queue.pop_front() {
        for (x, y) in neighbours4(c, r, w, h) {
            if !mask.get(x, y) && is_phase(grid.get(x, y), phase) {
                mask.set(x, y);
                queue.push_back((x, y));
            }
        }
    }
    mask
}

/// Pixel surrogate of `∂U` for the component `U` through `seed`.
pub fn extract_component_boundary(grid: &ClassGrid, seed: (usize, usize)) -> PixelMask {
    let comp = component_mask(grid, seed);
    boundary_of(comp.width, comp.height, |c, r| comp.get(c, r))
}

/// Boundaries of every phase plus all undecided pixels.
pub fn whole_surrogate(grid: &ClassGrid) -> PixelMask {
    let (w, h) = (grid.spec.width, grid.spec.height);
    let undecided = PixelMask {
        width: w,
        height: h,
        bits: grid.cells.iter().map(|c| matches!(c, PointClass::Undecided)).collect(),
    };
    (0..grid.period).fold(undecided, |acc, ph| acc.union(&extract_boundary(grid, ph)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCountFit {
    /// `(box side in pixels, occupied boxes)`.
    pub counts: Vec<(usize, usize)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `ln N − fit` per scale.
    pub residuals: Vec<f64>,
}

/// Least-squares slope of `ln N(ε)` against `ln(1/ε)`, boxes aligned at the origin.
pub fn box_count(mask: &PixelMask, scales: &[usize]) -> Result<BoxCountFit, RenderError> {
    let n = mask.count();
    if n < MIN_BOX_POINTS {
        return Err(RenderError::InsufficientData(format!("{n} points")));
    }
    let mut sc: Vec<usize> = scales.to_vec();
    sc.sort_unstable();
    sc.dedup();
    if sc.len() < 4 || sc[0] == 0 || sc[sc.len() - 1] < 4 * sc[0] {
        return Err(RenderError::InsufficientData(format!("scales {scales:?}")));
    }
    let pixels = mask.pixels();
    let counts: Vec<(usize, usize)> = sc
        .iter()
        .map(|&e| {
            let bw = mask.width.div_ceil(e);
            let mut occ = vec![false; bw * mask.height.div_ceil(e)];
            for &(c, r) in &pixels {
                occ[(r / e) * bw + c / e] = true;
            }
            (e, occ.iter().filter(|&&b| b).count())
        })
        .collect();
    let xs: Vec<f64> = counts.iter().map(|&(e, _)| -(e as f64).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&(_, k)| (k as f64).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(BoxCountFit { counts, slope, intercept, r2, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ItineraryAgreement {
    pub sampled: usize,
    /// Orbits that stayed finite for `depth` steps.
    pub computable: usize,
    pub matching: usize,
}

impl ItineraryAgreement {
    pub fn fraction(&self) -> f64 {
        if self.computable == 0 {
            0.0
        } else {
            self.matching as f64 / self.computable as f64
        }
    }
}

/// Counts pixel centers whose depth-`depth` itinerary has the `(s, k̲, s, k̲, …)` shape.
pub fn itinerary_agreement(
    cfg: &ExpMapConfig,
    k: &Kneading,
    grid: &ClassGrid,
    pixels: &[(usize, usize)],
    depth: usize,
) -> ItineraryAgreement {
    let results: Vec<Option<bool>> = pixels
        .par_iter()
        .map(|&(c, r)| {
            itinerary(cfg, grid.spec.pixel_center(c, r), depth)
                .ok()
                .filter(|it| it.0.len() >= depth)
                .map(|it| matches_sigma(&it, k))
        })
        .collect();
    ItineraryAgreement {
        sampled: pixels.len(),
        computable: results.iter().filter(|r| r.is_some()).count(),
        matching: results.iter().filter(|r| **r == Some(true)).count(),
    }
}
