//! Dynamics of the exponential family `f(z) = λ·e^z` with an attracting cycle.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: the map, attracting-cycle detection from the singular orbit,
//!   point classification.
//! * [`symbolic`]: inverse branches `g_s`, strip itineraries, kneading sequences,
//!   branch words and their derivative moduli.
//! * [`cover`]: cell covers of the non-escaping part of `W_M` and the series
//!   majorant that bounds their `(1+δ)`-sums.
//! * [`pressure`]: conformal IFS built from branch words, pressure sandwiches and
//!   Bowen-root bisection.
//! * [`render`]: pixel classification, component boundaries, box counting.
//! * [`io`]: text and image formats shared with the CLI.

pub mod cmath;
pub mod cover;
pub mod dynamics;
pub mod io;
pub mod pressure;
pub mod render;
pub mod symbolic;

pub use num_complex::Complex64;
