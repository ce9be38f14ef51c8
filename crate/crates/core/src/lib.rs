//! Numerical laboratory for a harmonic chain perturbed by evanescent flip noise
//! and exchange noise.
//!
//! Fourier convention used crate-wide, for a lattice function `g` and a test
//! function `f`:
//!
//! * `ĝ(θ) = Σ_x g(x) e^{2iπθx}`, inverted by `g(x) = ∫_𝕋 ĝ(θ) e^{-2iπθx} dθ`;
//! * `𝓕f(ξ) = ∫ f(x) e^{2iπξx} dx`;
//! * `𝓕_n f(ξ) = (1/n) Σ_x f(x/n) e^{2iπxξ/n}`, which is `n`-periodic.
//!
//! Every sign choice downstream (free-mode phase, transport direction, the
//! orientation of the fractional kernel) is stated against these formulas.

pub mod chain;
pub mod error;
pub mod fd;
pub mod fourier;
pub mod fractional;
pub mod harness;
pub mod moments;
pub mod params;
pub mod quad;
pub mod sum;
pub mod volume;

pub use error::{Error, Result};
pub use fourier::{SpectralFunction, SpectralGrid, TestFunction};
pub use params::ModelParams;
