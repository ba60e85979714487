//! Inverse branches, strip itineraries and branch words.
//!
//! Strips are the straight fundamental domains `H_s = {Im w ∈ (2πs − π, 2πs + π]}`
//! and `g_s(z) = Log(z/λ) + 2πis` maps `ℂ∖{0}` onto `H_s`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::cmath::plog;
use crate::dynamics::{apply, is_at_infinity, AttractingCycle, ExpMapConfig};

pub type StripIndex = i64;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SymbolicError {
    #[error("zero has no preimage under the exponential map")]
    ZeroArgument,
    #[error("orbit overflowed after {0} steps")]
    OrbitOverflow(usize),
}

/// `(k_1, …, k_{p−1})`, the strips containing `z_1 … z_{p−1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Kneading(pub Vec<StripIndex>);

impl Kneading {
    pub fn period(&self) -> usize {
        self.0.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Itinerary(pub Vec<StripIndex>);

/// Letters compose as `g_{letters[0]} ∘ g_{letters[1]} ∘ …`: the last letter acts first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct BranchWord(pub Vec<StripIndex>);

impl BranchWord {
    /// `G_k̲ = g_{k_1} ∘ … ∘ g_{k_{p−1}}`.
    pub fn kneading(k: &Kneading) -> Self {
        BranchWord(k.0.clone())
    }

    /// `G_{k̲,s} = G_k̲ ∘ g_s`.
    pub fn k_then_s(k: &Kneading, s: StripIndex) -> Self {
        let mut letters = k.0.clone();
        letters.push(s);
        BranchWord(letters)
    }

    /// `G_{s,k̲} = g_s ∘ G_k̲`.
    pub fn s_then_k(s: StripIndex, k: &Kneading) -> Self {
        let mut letters = vec![s];
        letters.extend_from_slice(&k.0);
        BranchWord(letters)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &BranchWord) -> Self {
        let mut letters = self.0.clone();
        letters.extend_from_slice(&other.0);
        BranchWord(letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn inverse_branch(
    cfg: &ExpMapConfig,
    s: StripIndex,
    z: Complex64,
) -> Result<Complex64, SymbolicError> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(SymbolicError::ZeroArgument);
    }
    let l = plog(z / cfg.lambda);
    Ok(Complex64::new(l.re, l.im + TAU * s as f64))
}

/// The `s` with `Im w ∈ (2πs − π, 2πs + π]`.
///
/// Heights within a few ulps above `2πs + π` still count as strip `s`, so that
/// images of the negative axis under `g_s` (argument exactly `π`) stay in `H_s`
/// after rounding.
pub fn strip_index(w: Complex64) -> StripIndex {
    let y = w.im;
    let mut k = (y / TAU).round();
    let slack = 8.0 * f64::EPSILON * y.abs().max(PI);
    let r = y - TAU * k;
    if r > PI + slack {
        k += 1.0;
    } else if r <= -PI + slack {
        k -= 1.0;
    }
    k as StripIndex
}

pub fn kneading_sequence(cycle: &AttractingCycle) -> Kneading {
    assert!(cycle.period > 1, "kneading sequence needs period at least 2");
    Kneading(cycle.points[1..].iter().map(|&z| strip_index(z)).collect())
}

pub fn itinerary(cfg: &ExpMapConfig, z: Complex64, depth: usize) -> Result<Itinerary, SymbolicError> {
    let mut out = Vec::with_capacity(depth);
    let mut w = z;
    for n in 0..depth {
        if is_at_infinity(w) {
            return Err(SymbolicError::OrbitOverflow(n));
        }
        out.push(strip_index(w));
        w = apply(cfg, w);
    }
    Ok(Itinerary(out))
}

/// Preimages along the word, innermost first: `inputs[i]` is fed to the letter
/// at position `len − 1 − i`, and the final image is returned separately.
fn word_chain(
    cfg: &ExpMapConfig,
    word: &BranchWord,
    z: Complex64,
) -> Result<(Complex64, Vec<Complex64>), SymbolicError> {
    let mut inputs = Vec::with_capacity(word.len());
    let mut w = z;
    for &s in word.0.iter().rev() {
        inputs.push(w);
        w = inverse_branch(cfg, s, w)?;
    }
    Ok((w, inputs))
}

pub fn apply_word(cfg: &ExpMapConfig, word: &BranchWord, z: Complex64) -> Result<Complex64, SymbolicError> {
    Ok(word_chain(cfg, word, z)?.0)
}

/// `ln |G'(z)| = −Σ ln |input at each stage|`, since `|g_s'(z)| = 1/|z|`.
pub fn word_log_derivative(cfg: &ExpMapConfig, word: &BranchWord, z: Complex64) -> Result<f64, SymbolicError> {
    let (_, inputs) = word_chain(cfg, word, z)?;
    Ok(-inputs.iter().map(|w| w.norm().ln()).sum::<f64>())
}

pub fn word_derivative_modulus(cfg: &ExpMapConfig, word: &BranchWord, z: Complex64) -> Result<f64, SymbolicError> {
    word_log_derivative(cfg, word, z).map(f64::exp)
}

/// Entries at positions `≡ j (mod p)`, `1 ≤ j < p`, equal `k_j`.
///
/// Prefixes shorter than `p` carry no information and are reported as not matching.
pub fn matches_sigma(itin: &Itinerary, k: &Kneading) -> bool {
    let p = k.period();
    if itin.0.len() < p {
        return false;
    }
    itin.0
        .iter()
        .enumerate()
        .all(|(i, &s)| i % p == 0 || s == k.0[i % p - 1])
}

/// [`matches_sigma`] plus at least `min_breaks` free positions outside `{k_j}`.
pub fn matches_sigma_prime(itin: &Itinerary, k: &Kneading, min_breaks: usize) -> bool {
    if !matches_sigma(itin, k) {
        return false;
    }
    let p = k.period();
    let breaks = itin
        .0
        .iter()
        .step_by(p)
        .filter(|s| !k.0.contains(s))
        .count();
    breaks >= min_breaks
}
