//! Fluctuation–dissipation coefficients and the resolvent integral.
//!
//! `u = Σ_{x, k≥1} ρ_k(x) ω_x ω_{x+k}` solves `(γ S^flip + λ S^exch) u = 2 ω_0 ω_1` when
//! `ρ̂_k = ρ̂_1 X^{k-1}` with
//!
//! ```text
//! X(θ)  = e^{-iπθ} cos(πθ) / (1 + g + √((1+g)² - cos² πθ)),   g = γ/λ
//! ρ̂_1(θ) = -1 / (γ + λ √((1+g)² - cos² πθ))
//! ```
//!
//! The rationalized form of `X` has no removable singularity at `θ = ±1/2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{SpectralFunction, SpectralGrid};
use crate::params::ModelParams;
use crate::quad::{integrate_real, QuadOptions};

/// Window tail mass above this is an error.
pub const WINDOW_TAIL_LIMIT: f64 = 1e-10;

fn check_lambda(params: &ModelParams) -> Result<()> {
    if !(params.lambda > 0.0) {
        return Err(Error::param("lambda", "fluctuation-dissipation coefficients need lambda > 0"));
    }
    Ok(())
}

fn radical(theta: f64, g: f64) -> f64 {
    let c = (PI * theta).cos();
    ((1.0 + g) * (1.0 + g) - c * c).max(0.0).sqrt()
}

pub fn x_of_theta(theta: f64, params: &ModelParams) -> Result<Complex64> {
    check_lambda(params)?;
    let g = params.gamma_n() / params.lambda;
    let c = (PI * theta).cos();
    Ok(Complex64::from_polar(c / (1.0 + g + radical(theta, g)), -PI * theta))
}

/// The displayed (unrationalized) form, used only to confirm the limit at `θ = ±1/2`.
pub fn x_of_theta_raw(theta: f64, params: &ModelParams) -> Complex64 {
    let g = params.gamma_n() / params.lambda;
    let braces = 1.0 + g - radical(theta, g);
    Complex64::new(2.0 * braces, 0.0) / (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, 2.0 * PI * theta))
}

pub fn rho1_hat(theta: f64, params: &ModelParams) -> Result<f64> {
    check_lambda(params)?;
    let gamma = params.gamma_n();
    let d = gamma + params.lambda * radical(theta, gamma / params.lambda);
    if d == 0.0 {
        return Err(Error::Singular(format!("rho1_hat diverges at theta = {theta} with gamma_n = 0")));
    }
    Ok(-1.0 / d)
}

/// Both bounds of the sharp-estimate lemma on an `m`-point grid of `𝕋`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateCheck {
    pub n: u64,
    /// `max |X| (1 + √(γ/λ)) / |cos πθ|`; the bound holds when ≤ 1.
    pub x_ratio: f64,
    /// `max |ρ̂_1| λ √(γ/λ + sin² πθ)`.
    pub rho_ratio: f64,
    pub x_holds: bool,
    pub rho_holds: bool,
}

pub fn check_estimates(params: &ModelParams, m: usize) -> Result<EstimateCheck> {
    check_lambda(params)?;
    let g = params.gamma_n() / params.lambda;
    let mut x_ratio: f64 = 0.0;
    let mut rho_ratio: f64 = 0.0;
    let mut x_holds = true;
    let mut rho_holds = true;
    for j in 0..m {
        let th = -0.5 + j as f64 / (m - 1) as f64;
        let x = x_of_theta(th, params)?.norm();
        let xb = (PI * th).cos().abs() / (1.0 + g.sqrt());
        let slack = 1e-14;
        if x > xb + slack {
            x_holds = false;
        }
        if xb > 0.0 {
            x_ratio = x_ratio.max(x / xb);
        }
        let s = (PI * th).sin();
        let rb = 1.0 / (params.lambda * (g + s * s).sqrt());
        if rb.is_finite() {
            let r = rho1_hat(th, params)?.abs();
            if r > rb * (1.0 + slack) {
                rho_holds = false;
            }
            rho_ratio = rho_ratio.max(r / rb);
        }
    }
    Ok(EstimateCheck { n: params.n, x_ratio, rho_ratio, x_holds, rho_holds })
}

/// Smallest `n` of the ladder from which both bounds hold at every larger rung.
pub fn smallest_valid_n(base: &ModelParams, ladder: &[u64], m: usize) -> Result<Option<u64>> {
    let mut first = None;
    for &n in ladder {
        let c = check_estimates(&base.with_n(n), m)?;
        if c.x_holds && c.rho_holds {
            first.get_or_insert(n);
        } else {
            first = None;
        }
    }
    Ok(first)
}

#[derive(Clone, Debug)]
pub struct FdCoefficients {
    pub params: ModelParams,
    /// Periodic grid on `𝕋` with an even number of points, so `θ = 0` and `θ = -1/2` are nodes.
    pub rho1_hat: SpectralFunction,
    pub x: SpectralFunction,
    /// `rho[k-1][x + window]` is `ρ_k(x)` for `|x| ≤ window`.
    pub rho: Vec<Vec<f64>>,
    pub window: usize,
    pub tail_mass: f64,
    /// `Σ_k ∫ |ρ̂_k|²`.
    pub spectral_mass: f64,
}

impl FdCoefficients {
    pub fn k_max(&self) -> usize {
        self.rho.len()
    }

    pub fn rho_at(&self, k: usize, x: i64) -> f64 {
        if k == 0 || k > self.rho.len() || x.unsigned_abs() as usize > self.window {
            return 0.0;
        }
        self.rho[k - 1][(x + self.window as i64) as usize]
    }

    /// `Σ_{x,k} ρ_k(x)²` over the window.
    pub fn lattice_mass(&self) -> f64 {
        self.rho.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    /// `ρ_k` ℓ² norms, `k = 1..=K`.
    pub fn level_norms(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }
}

/// Default coefficient window `⌈40/√γ_n⌉`.
pub fn default_window(params: &ModelParams) -> usize {
    (40.0 / params.gamma_n().sqrt()).ceil() as usize
}

pub fn rho_coefficients(params: &ModelParams, k_max: usize, window: usize) -> Result<FdCoefficients> {
    rho_coefficients_scaled(params, k_max, window, 1.0)
}

/// As [`rho_coefficients`] with `ρ̂_1` multiplied by `scale`; a sensitivity probe.
pub fn rho_coefficients_scaled(params: &ModelParams, k_max: usize, window: usize, scale: f64) -> Result<FdCoefficients> {
    check_lambda(params)?;
    if k_max < 2 {
        return Err(Error::param("K", "need at least 2 levels"));
    }
    if params.gamma_n() == 0.0 {
        return Err(Error::Singular("rho1_hat diverges at theta = 0 with gamma_n = 0".into()));
    }
    let p = (4 * (2 * window + 1)).max(1024).next_power_of_two();
    let grid = SpectralGrid::torus(p);
    let mut r1 = Vec::with_capacity(p);
    let mut xs = Vec::with_capacity(p);
    for th in grid.points() {
        r1.push(Complex64::new(scale * rho1_hat(th, params)?, 0.0));
        xs.push(x_of_theta(th, params)?);
    }
    let fft = FftPlanner::new().plan_fft_forward(p);
    let mut level = r1.clone();
    let mut rho = Vec::with_capacity(k_max);
    let mut spectral_mass = 0.0;
    for _ in 0..k_max {
        spectral_mass += level.iter().map(|v| v.norm_sqr()).sum::<f64>() / p as f64;
        // ρ(x) = (1/P) Σ_j ρ̂(θ_j) e^{-2iπθ_j x}, θ_j = -1/2 + j/P.
        let mut buf = level.clone();
        fft.process(&mut buf);
        let row: Vec<f64> = (-(window as i64)..=window as i64)
            .map(|x| {
                let sign = if x.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sign * buf[x.rem_euclid(p as i64) as usize].re / p as f64
            })
            .collect();
        rho.push(row);
        for (v, x) in level.iter_mut().zip(&xs) {
            *v *= x;
        }
    }
    let mut out = FdCoefficients {
        params: *params,
        rho1_hat: SpectralFunction { grid, values: r1 },
        x: SpectralFunction { grid, values: xs },
        rho,
        window,
        tail_mass: 0.0,
        spectral_mass,
    };
    out.tail_mass = (spectral_mass - out.lattice_mass()).max(0.0);
    if out.tail_mass > WINDOW_TAIL_LIMIT {
        return Err(Error::Window { tail: out.tail_mass, limit: WINDOW_TAIL_LIMIT });
    }
    Ok(out)
}

/// `F_k(x)` from the coefficient equations, with `ρ_{K+1} = 0` and `ρ = 0` off the window.
pub fn f_coefficient(coeffs: &FdCoefficients, k: usize, x: i64) -> f64 {
    let gamma = coeffs.params.gamma_n();
    let lambda = coeffs.params.lambda;
    let r = |k: usize, x: i64| coeffs.rho_at(k, x);
    if k == 1 {
        -2.0 * (2.0 * gamma + lambda) * r(1, x) + lambda * (r(2, x) + r(2, x - 1))
    } else {
        -4.0 * (gamma + lambda) * r(k, x) + lambda * (r(k - 1, x) + r(k - 1, x + 1) + r(k + 1, x) + r(k + 1, x - 1))
    }
}

/// ℓ² norm of `F_k(x) - 2·𝟙{k=1, x=0}` over `k ≤ K`, `|x| ≤ window + 1`.
pub fn fd_residual(coeffs: &FdCoefficients) -> f64 {
    let w = coeffs.window as i64 + 1;
    let mut acc = 0.0;
    for k in 1..=coeffs.k_max() {
        for x in -w..=w {
            let target = if k == 1 && x == 0 { 2.0 } else { 0.0 };
            acc += (f_coefficient(coeffs, k, x) - target).powi(2);
        }
    }
    acc.sqrt()
}

/// Max over the grid and `k ≤ K` of the Fourier-side recursion residuals.
pub fn recursion_residual(params: &ModelParams, k_max: usize, m: usize) -> Result<f64> {
    check_lambda(params)?;
    let gamma = params.gamma_n();
    let lambda = params.lambda;
    let mut worst: f64 = 0.0;
    for j in 0..m {
        let th = -0.5 + j as f64 / (m - 1) as f64;
        let r1 = rho1_hat(th, params)?;
        let x = x_of_theta(th, params)?;
        let ep = Complex64::from_polar(1.0, 2.0 * PI * th);
        let em = ep.conj();
        let rho = |k: usize| r1 * x.powu(k as u32 - 1);
        let first = -2.0 * (2.0 * gamma + lambda) * rho(1) + lambda * (1.0 + ep) * rho(2) - 2.0;
        worst = worst.max(first.norm());
        for k in 2..=k_max {
            let v = -4.0 * (gamma + lambda) * rho(k) + lambda * (1.0 + em) * rho(k - 1) + lambda * (1.0 + ep) * rho(k + 1);
            worst = worst.max(v.norm());
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub n: u64,
    pub gamma: f64,
    /// Fitted `r` in `Σ_x ρ_k(x)² ≈ C e^{-r k}` over the upper half of the levels.
    pub rate: f64,
    pub rate_over_sqrt_gamma: f64,
    pub rate_over_gamma: f64,
}

pub fn localization(coeffs: &FdCoefficients) -> Localization {
    let norms = coeffs.level_norms();
    let k_lo = norms.len() / 2;
    let pts: Vec<(f64, f64)> = norms
        .iter()
        .enumerate()
        .skip(k_lo)
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| ((k + 1) as f64, 2.0 * v.ln()))
        .collect();
    let slope = fit_slope(&pts);
    let gamma = coeffs.params.gamma_n();
    Localization {
        n: coeffs.params.n,
        gamma,
        rate: -slope,
        rate_over_sqrt_gamma: -slope / gamma.sqrt(),
        rate_over_gamma: -slope / gamma,
    }
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `|ρ̂_1(s)|² / (1 - |X(s)|)²`, the certified bound on `|Φ̂|²` along `s = k₁ + k₂`.
pub fn phi_bound(s: f64, params: &ModelParams) -> Result<f64> {
    let r = rho1_hat(s, params)?;
    let x = x_of_theta(s, params)?.norm();
    Ok(r * r / ((1.0 - x) * (1.0 - x)))
}

/// `Σ_{j≥1} (e^{2iπk₁j} + e^{2iπk₂j}) ψ̂_j(k₁+k₂)` with `ψ_j(x) = ρ_{j-1}(x+1) + ρ_{j+1}(x)`,
/// summed term by term until the geometric tail is below `1e-16`.
pub fn phi_series(k1: f64, k2: f64, params: &ModelParams) -> Result<Complex64> {
    let s = k1 + k2;
    let r1 = rho1_hat(s, params)?;
    let x = x_of_theta(s, params)?;
    let shift = Complex64::from_polar(1.0, -2.0 * PI * s);
    let q1 = Complex64::from_polar(1.0, 2.0 * PI * k1);
    let q2 = Complex64::from_polar(1.0, 2.0 * PI * k2);
    let rho = |k: usize| if k == 0 { Complex64::new(0.0, 0.0) } else { x.powu(k as u32 - 1) * r1 };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut j = 1usize;
    loop {
        let psi = shift * rho(j - 1) + rho(j + 1);
        acc += (q1.powu(j as u32) + q2.powu(j as u32)) * psi;
        if (x.norm().powi(j as i32) * r1.abs()) < 1e-16 || j > 100_000 {
            return Ok(acc);
        }
        j += 1;
    }
}

/// `max |series|² / bound` on an `m × m` grid of `[0,1)²`: how tight the certified bound is.
pub fn phi_bound_tightness(params: &ModelParams, m: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let k1 = i as f64 / m as f64;
            let k2 = j as f64 / m as f64;
            let v = phi_series(k1, k2, params)?.norm_sqr();
            worst = worst.max(v / phi_bound(k1 + k2, params)?);
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventIntegral {
    pub n: u64,
    /// 2-D adaptive quadrature of the integrand on `[0,1]²`.
    pub route_a: f64,
    /// Exact reduction to one dimension along `s = k₁ + k₂`.
    pub route_b: f64,
}

/// `∫_{[0,1]²} bound(k₁+k₂) / ((z + γ_n) + sin² πk₁ + sin² πk₂) dk`, `z = 1/(t n^a)`.
///
/// At fixed `s = k₁ + k₂` the inner integral is `1/√((1+A)² - cos² πs)` with `A = z + γ_n`,
/// which gives the one-dimensional route.
pub fn resolvent_integral(params: &ModelParams, t: f64) -> Result<ResolventIntegral> {
    check_lambda(params)?;
    if !(t > 0.0) {
        return Err(Error::param("t", "must be > 0"));
    }
    let big_a = 1.0 / params.horizon(t) + params.gamma_n();
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-10, max_intervals: 20_000 };
    let (route_b, _) = integrate_real(
        |s| {
            let c = (PI * s).cos();
            phi_bound(s, params).unwrap_or(f64::NAN) / ((1.0 + big_a).powi(2) - c * c).sqrt()
        },
        0.0,
        1.0,
        &[0.5],
        opts,
    )?;
    let inner_opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 20_000 };
    let mut failure = None;
    let (route_a, _) = integrate_real(
        |k1| {
            let s1 = (PI * k1).sin();
            // The bound peaks where k₁ + k₂ is an integer.
            let brk = [1.0 - k1];
            match integrate_real(
                |k2| {
                    let s2 = (PI * k2).sin();
                    phi_bound(k1 + k2, params).unwrap_or(f64::NAN) / (big_a + s1 * s1 + s2 * s2)
                },
                0.0,
                1.0,
                &brk,
                inner_opts,
            ) {
                Ok((v, _)) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        &[],
        QuadOptions { abs_tol: 0.0, rel_tol: 1e-9, max_intervals: 5_000 },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ResolventIntegral { n: params.n, route_a, route_b })
}
