//! Volume correlations in closed Fourier form and the `(a, b)` regime map.
//!
//! `η_t^n(f, h) = (1/n) Σ_{y,z} f((y+z)/n) h(y/n) 𝒱(z, t n^a)`. Rewriting the double
//! sum with `𝒱(z) = ∫ 𝒱̂(θ) e^{-2iπθz} dθ` gives
//!
//! ```text
//! η_t^n(f, h) = ∫_{-n/2}^{n/2} 𝒱̂(ξ/n, t n^a) · conj(𝓕_n f(ξ)) · 𝓕_n h(ξ) dξ,
//! ```
//!
//! so the factor paired with the evolved site carries the conjugate. The free
//! phase `e^{-2i sin(2πθ) T} ≈ e^{-4iπθT}` translates the kernel in `u - v` by
//! `-2T/n`: the limit transport is `η_t = β^{-1} ∫ f(u - 2t) h(u) du`. The
//! translated frame multiplies the integrand by `e^{+4iπTξ/n}`, which removes it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{discrete_ft_poisson, TestFunction};
use crate::params::ModelParams;
use crate::quad::{integrate_complex, CompositeRule, QuadOptions};

/// Boundary tolerance of the regime map.
pub const REGIME_TOL: f64 = 1e-12;
/// Quadrature refinement target; the gate below raises a resolution error.
const ETA_CAUCHY: f64 = 1e-11;
const ETA_GATE: f64 = 1e-8;
const MAX_PANELS: usize = 1 << 23;

/// `𝒱̂(θ, t) = β^{-1} exp(t[-2i sin 2πθ - 2γ_n - 4λ sin² πθ])`.
pub fn volume_hat(theta: f64, t_phys: f64, params: &ModelParams) -> Complex64 {
    let s = (PI * theta).sin();
    let re = -t_phys * (2.0 * params.gamma_n() + 4.0 * params.lambda * s * s);
    let im = -2.0 * t_phys * (2.0 * PI * theta).sin();
    Complex64::from_polar(re.exp() / params.beta, im)
}

/// `𝒱(z, t) = ∫_𝕋 𝒱̂(θ, t) e^{-2iπθz} dθ` on the infinite lattice.
pub fn volume_closed_form(z: i64, t_phys: f64, params: &ModelParams) -> Result<f64> {
    let r = integrate_complex(
        |th| volume_hat(th, t_phys, params) * Complex64::from_polar(1.0, -2.0 * PI * th * z as f64),
        -0.5,
        0.5,
        &[0.0],
        QuadOptions::tol(1e-15, 1e-12),
    )?;
    Ok(r.value.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    NoEvolution,
    Vanish,
    Relaxation,
    Transport,
    Heat,
    RelaxationTransport,
    RelaxationHeat,
}

impl RegimeKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeKind::NoEvolution => "no-evolution",
            RegimeKind::Vanish => "vanish",
            RegimeKind::Relaxation => "relaxation",
            RegimeKind::Transport => "transport",
            RegimeKind::Heat => "heat",
            RegimeKind::RelaxationTransport => "relaxation+transport",
            RegimeKind::RelaxationHeat => "relaxation+heat",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// `η`.
    Static,
    /// `η̃`, moving with the free transport.
    Translated,
}

/// Limit generator `transport·∇ + diffusion·λΔ - relaxation·c·Id` in the given frame.
///
/// `diffusion` is in units of `λ` and `relaxation` in units of `c`, so the label does
/// not depend on the physical parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub kind: RegimeKind,
    pub transport: f64,
    pub diffusion: f64,
    pub relaxation: f64,
    pub frame: Frame,
}

impl RegimeLabel {
    fn new(kind: RegimeKind, frame: Frame) -> Self {
        let (transport, diffusion, relaxation) = match kind {
            RegimeKind::NoEvolution | RegimeKind::Vanish => (0.0, 0.0, 0.0),
            RegimeKind::Relaxation => (0.0, 0.0, 2.0),
            RegimeKind::Transport => (2.0, 0.0, 0.0),
            RegimeKind::Heat => (0.0, 1.0, 0.0),
            RegimeKind::RelaxationTransport => (2.0, 0.0, 2.0),
            RegimeKind::RelaxationHeat => (0.0, 1.0, 2.0),
        };
        RegimeLabel { kind, transport, diffusion, relaxation, frame }
    }
}

pub fn classify_regime(a: f64, b: f64) -> Result<RegimeLabel> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::param("a", "must be positive and finite"));
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::param("b", "must be nonnegative and finite"));
    }
    use Frame::*;
    use RegimeKind::*;
    let eq = |x: f64, y: f64| (x - y).abs() <= REGIME_TOL;
    let label = if b <= 1.0 + REGIME_TOL {
        if eq(a, b) {
            if eq(b, 1.0) {
                RegimeLabel::new(RelaxationTransport, Static)
            } else {
                RegimeLabel::new(Relaxation, Static)
            }
        } else if a < b {
            RegimeLabel::new(NoEvolution, Static)
        } else {
            RegimeLabel::new(Vanish, Static)
        }
    } else {
        // Beyond b = 2 the flips are slower than diffusion: the ceiling is a = 2.
        let top = b.min(2.0);
        if eq(a, 1.0) {
            RegimeLabel::new(Transport, Static)
        } else if a < 1.0 {
            RegimeLabel::new(NoEvolution, Static)
        } else if eq(a, top) {
            if b < 2.0 - REGIME_TOL {
                RegimeLabel::new(Relaxation, Translated)
            } else if eq(b, 2.0) {
                RegimeLabel::new(RelaxationHeat, Translated)
            } else {
                RegimeLabel::new(Heat, Translated)
            }
        } else if a < top {
            RegimeLabel::new(NoEvolution, Translated)
        } else {
            RegimeLabel::new(Vanish, Static)
        }
    };
    Ok(label)
}

fn spectral_cutoff(f: &TestFunction, h: &TestFunction) -> f64 {
    f.spectral_radius(1e-18).min(h.spectral_radius(1e-18))
}

/// Doubles panel counts until successive composite Gauss–Legendre values agree.
fn refine<F>(what: &str, integrand: F, lo: f64, hi: f64, start_panels: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let rule = CompositeRule::new(20);
    let mut panels = start_panels.max(8);
    let mut prev = rule.integrate(&integrand, lo, hi, panels);
    loop {
        panels *= 2;
        let cur = rule.integrate(&integrand, lo, hi, panels);
        let delta = (cur - prev).norm();
        if delta <= ETA_CAUCHY * cur.norm().max(1.0) {
            return Ok(cur);
        }
        if panels >= MAX_PANELS {
            if delta <= ETA_GATE {
                return Ok(cur);
            }
            return Err(Error::Resolution { what: what.to_string(), delta });
        }
        prev = cur;
    }
}

fn eta_frame(f: &TestFunction, h: &TestFunction, t: f64, params: &ModelParams, translated: bool) -> Result<f64> {
    if f.is_zero() || h.is_zero() {
        return Ok(0.0);
    }
    let nf = params.n_f64();
    let big_t = params.horizon(t);
    let mut xi_max = spectral_cutoff(f, h).min(nf / 2.0);
    // Exchange damping e^{-4λT sin²(πξ/n)} below e^{-50} contributes nothing.
    let damp = 50.0 / (4.0 * params.lambda * big_t);
    if params.lambda > 0.0 && damp < 1.0 {
        xi_max = xi_max.min(nf / PI * damp.sqrt().asin());
    }
    let rate = if translated {
        // Residual phase T(4πξ/n - 2 sin 2πξ/n) has slope ≤ (4πT/n)(1 - cos 2πξ/n).
        4.0 * PI * big_t / nf * (1.0 - (2.0 * PI * xi_max / nf).cos())
    } else {
        4.0 * PI * big_t / nf
    };
    let start = (2.0 * xi_max * rate / PI).ceil() as usize + 16;
    let integrand = |xi: f64| {
        let mut v = volume_hat(xi / nf, big_t, params)
            * discrete_ft_poisson(f, params.n, xi).conj()
            * discrete_ft_poisson(h, params.n, xi);
        if translated {
            v *= Complex64::from_polar(1.0, 4.0 * PI * big_t * xi / nf);
        }
        v
    };
    let what = if translated { "eta_tilde" } else { "eta" };
    Ok(refine(what, integrand, -xi_max, xi_max, start.min(MAX_PANELS / 4))?.re)
}

/// `η_t^n(f, h)`, static frame.
pub fn eta(f: &TestFunction, h: &TestFunction, t: f64, params: &ModelParams) -> Result<f64> {
    eta_frame(f, h, t, params, false)
}

/// `η̃_t^n(f, h)`, the frame translated by the free transport; defined for `a > 1`.
pub fn eta_tilde(f: &TestFunction, h: &TestFunction, t: f64, params: &ModelParams) -> Result<f64> {
    if !(params.a > 1.0) {
        return Err(Error::param("a", "translated frame needs a > 1"));
    }
    eta_frame(f, h, t, params, true)
}

/// The correlation in the frame a regime label prescribes.
pub fn eta_in_frame(label: &RegimeLabel, f: &TestFunction, h: &TestFunction, t: f64, params: &ModelParams) -> Result<f64> {
    match label.frame {
        Frame::Static => eta(f, h, t, params),
        Frame::Translated => eta_tilde(f, h, t, params),
    }
}

/// `β^{-1} ‖𝓕_n f‖ ‖𝓕_n h‖` over one period, the a priori bound on `|η|`.
pub fn eta_bound(f: &TestFunction, h: &TestFunction, params: &ModelParams) -> Result<f64> {
    let nf = params.n_f64();
    let norm = |g: &TestFunction| -> Result<f64> {
        let r = g.spectral_radius(1e-18).min(nf / 2.0);
        let v = refine("eta bound", |xi| Complex64::new(discrete_ft_poisson(g, params.n, xi).norm_sqr(), 0.0), -r, r, 16)?;
        Ok(v.re.max(0.0).sqrt())
    };
    Ok(norm(f)? * norm(h)? / params.beta)
}

/// Limit value `β^{-1} ∫ conj(𝓕f) 𝓕h K̂ dξ` with the label's generator:
/// `K̂(ξ) = e^{-relaxation·c·t} e^{-4π² diffusion·λ t ξ²} e^{-2iπ ξ transport t}`.
pub fn limit_correlation(label: &RegimeLabel, f: &TestFunction, h: &TestFunction, t: f64, params: &ModelParams) -> Result<f64> {
    if label.kind == RegimeKind::Vanish || f.is_zero() || h.is_zero() {
        return Ok(0.0);
    }
    let relax = (-label.relaxation * params.c * t).exp();
    let var = label.diffusion * params.lambda * t;
    let shift = label.transport * t;
    let xi_max = spectral_cutoff(f, h);
    let integrand = |xi: f64| {
        f.continuous_ft(xi).conj()
            * h.continuous_ft(xi)
            * Complex64::from_polar((-4.0 * PI * PI * var * xi * xi).exp(), -2.0 * PI * xi * shift)
    };
    let start = (2.0 * xi_max * shift).ceil() as usize + 16;
    Ok(refine("limit correlation", integrand, -xi_max, xi_max, start)?.re * relax / params.beta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub a: f64,
    pub b: f64,
    pub label: String,
    pub frame: Frame,
    pub transport: f64,
    pub diffusion: f64,
    pub relaxation: f64,
    pub eta_n1000: f64,
    pub eta_n10000: f64,
    pub eta_limit: f64,
}

/// Regime, finite-`n` values at `n = 10³, 10⁴` and the limit for each `(a, b)`.
pub fn phase_diagram(
    points: &[(f64, f64)],
    f: &TestFunction,
    h: &TestFunction,
    t: f64,
    lambda: f64,
    c: f64,
    beta: f64,
) -> Result<Vec<PhaseRow>> {
    points
        .iter()
        .map(|&(a, b)| {
            let label = classify_regime(a, b)?;
            let at = |n: u64| -> Result<f64> {
                let p = ModelParams::new(lambda, c, b, n, beta, a)?;
                eta_in_frame(&label, f, h, t, &p)
            };
            let p = ModelParams::new(lambda, c, b, 10_000, beta, a)?;
            Ok(PhaseRow {
                a,
                b,
                label: label.kind.name().to_string(),
                frame: label.frame,
                transport: label.transport,
                diffusion: label.diffusion,
                relaxation: label.relaxation,
                eta_n1000: at(1000)?,
                eta_n10000: at(10_000)?,
                eta_limit: limit_correlation(&label, f, h, t, &p)?,
            })
        })
        .collect()
}

/// The twelve `(a, b)` points used for the regime checks; every case of the map appears.
pub const REGIME_GRID: [(f64, f64); 12] = [
    (0.2, 0.9),
    (0.5, 0.5),
    (1.0, 1.0),
    (1.2, 0.8),
    (1.0, 1.5),
    (1.2, 1.9),
    (1.5, 1.5),
    (1.8, 1.5),
    (1.2, 3.0),
    (2.0, 2.0),
    (2.0, 3.0),
    (2.5, 3.0),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_for_named_points() {
        let l = classify_regime(1.0, 1.5).unwrap();
        assert_eq!(l.kind, RegimeKind::Transport);
        assert_eq!(l.transport, 2.0);
        let l = classify_regime(1.0, 1.0).unwrap();
        assert_eq!(l.kind, RegimeKind::RelaxationTransport);
        assert_eq!((l.transport, l.relaxation), (2.0, 2.0));
        let l = classify_regime(2.0, 3.0).unwrap();
        assert_eq!(l.kind, RegimeKind::Heat);
        assert_eq!((l.diffusion, l.relaxation), (1.0, 0.0));
        let l = classify_regime(2.0, 2.0).unwrap();
        assert_eq!(l.kind, RegimeKind::RelaxationHeat);
        assert_eq!(l.frame, Frame::Translated);
        assert!(classify_regime(0.0, 1.0).is_err());
    }

    #[test]
    fn volume_hat_special_values() {
        let p = ModelParams::new(1.3, 0.7, 0.5, 16, 2.0, 1.0).unwrap();
        let v = volume_hat(0.0, 3.0, &p);
        assert!((v.re - (-2.0 * p.gamma_n() * 3.0).exp() / 2.0).abs() < 1e-15);
        assert!(v.im.abs() < 1e-15);
        assert!((volume_hat(0.31, 0.0, &p) - 0.5).norm() < 1e-15);
    }
}
