//! Spectral objects of the `b > 1` regime and the skew 3/2-stable kernel.
//!
//! Symbols (exchange rate 1, as in the underlying computations):
//! `Λ(x,y) = 4[sin² πx + sin² πy]`, `Ω(x,y) = 2[sin 2πx + sin 2πy]`,
//! `den = Λ + 4γ_n - iΩ`.
//!
//! Each of `G_n`, `I_n`, `J_n`, `K_n` has a quadrature route and a residue route.
//! With `w = e^{2iπy}` and `z_±` the roots of `z² - 2(1+γ)z + w`, `|z_-| < 1 < |z_+|`:
//!
//! ```text
//! G_n = (w-1)²/(4w²) · [(1+γ) + 2(1+γ)²/(z_- - z_+)]
//! I_n = -(w-1)/(2w) · [1 - 2(1+γ)/w + 2(1+γ)(z_- - 1)/(z_-(z_- - z_+))]
//! J_n = -[(1+γ)/w + (1+γ)/(z_-(z_- - z_+))]
//! K_n = -w/(w-1) · I_n
//! ```
//!
//! The factor inside `I_n` is `R(u,v) = 1 - e^{-2iπv}`, read off from the transform of `w_n`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{discrete_ft_at, discrete_ft_poisson, TestFunction};
use crate::params::ModelParams;
use crate::quad::{integrate_complex, integrate_real, CompositeRule, QuadOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// `Λ` and `Ω` on `𝕋²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SymbolPair;

impl SymbolPair {
    pub fn lambda(x: f64, y: f64) -> f64 {
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        4.0 * (sx * sx + sy * sy)
    }

    pub fn omega(x: f64, y: f64) -> f64 {
        2.0 * ((2.0 * PI * x).sin() + (2.0 * PI * y).sin())
    }

    /// `(Λ + 4γ - iΩ)(x, y)`.
    pub fn den(x: f64, y: f64, gamma: f64) -> Complex64 {
        Complex64::new(Self::lambda(x, y) + 4.0 * gamma, -Self::omega(x, y))
    }
}

/// Stencils on `(1/n)ℤ` and `(1/n)ℤ²`, indexed by integer lattice coordinates.
#[derive(Clone, Copy, Debug)]
pub struct DiscreteOperators {
    pub n: u64,
}

impl DiscreteOperators {
    pub fn new(n: u64) -> Self {
        DiscreteOperators { n }
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn laplacian_1d<F: Fn(i64) -> Complex64>(&self, f: F, x: i64) -> Complex64 {
        self.nf().powi(2) * (f(x + 1) + f(x - 1) - 2.0 * f(x))
    }

    /// `∇_n f ⊗ δ`, supported on `|x - y| = 1`.
    pub fn grad_delta<F: Fn(i64) -> Complex64>(&self, f: F, x: i64, y: i64) -> Complex64 {
        let c = 0.5 * self.nf().powi(2);
        if y == x + 1 {
            c * (f(x + 1) - f(x))
        } else if y == x - 1 {
            c * (f(x) - f(x - 1))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn laplacian_2d<H: Fn(i64, i64) -> Complex64>(&self, h: H, x: i64, y: i64) -> Complex64 {
        self.nf().powi(2) * (h(x + 1, y) + h(x - 1, y) + h(x, y + 1) + h(x, y - 1) - 4.0 * h(x, y))
    }

    /// Discrete `(-2,-2)·∇`.
    pub fn a_n<H: Fn(i64, i64) -> Complex64>(&self, h: H, x: i64, y: i64) -> Complex64 {
        self.nf() * (h(x, y - 1) + h(x - 1, y) - h(x, y + 1) - h(x + 1, y))
    }

    /// Derivative along the diagonal.
    pub fn d_n<H: Fn(i64, i64) -> Complex64>(&self, h: H, x: i64) -> Complex64 {
        self.nf() * (h(x, x + 1) - h(x - 1, x))
    }

    /// `∂_y h(x,x) ⊗ δ`, supported on `|x - y| = 1`.
    pub fn d_tilde<H: Fn(i64, i64) -> Complex64>(&self, h: H, x: i64, y: i64) -> Complex64 {
        let c = self.nf().powi(2);
        if y == x + 1 {
            c * (h(x, x + 1) - h(x, x))
        } else if y == x - 1 {
            c * (h(x - 1, x) - h(x - 1, x - 1))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// `L_n = √n A_n + n^{-1/2} Δ_n - 4 n^{3/2} γ_n`.
    pub fn l_n<H: Fn(i64, i64) -> Complex64>(&self, h: H, x: i64, y: i64, gamma: f64) -> Complex64 {
        let sn = self.nf().sqrt();
        sn * self.a_n(&h, x, y) + self.laplacian_2d(&h, x, y) / sn - 4.0 * self.nf().powf(1.5) * gamma * h(x, y)
    }

    /// Fourier multiplier of `L_n` at `(k, ℓ)`, read off by applying the stencil to a plane wave.
    pub fn l_n_multiplier(&self, k: f64, l: f64, gamma: f64) -> Complex64 {
        let nf = self.nf();
        let wave = |x: i64, y: i64| cis(-2.0 * PI * (k * x as f64 + l * y as f64) / nf);
        self.l_n(wave, 0, 0, gamma)
    }

    /// `𝓕_n(∇_n f ⊗ δ)(k, ℓ)` by direct lattice summation of the stencil.
    pub fn grad_delta_hat(&self, f: &TestFunction, k: f64, l: f64) -> Result<Complex64> {
        let nf = self.nf();
        let (lo, hi) = crate::fourier::lattice_support(f, self.n)?;
        let fx = |x: i64| Complex64::new(f.eval(x as f64 / nf), 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for x in lo - 2..=hi + 2 {
            for y in [x - 1, x + 1] {
                acc += self.grad_delta(fx, x, y) * cis(2.0 * PI * (k * x as f64 + l * y as f64) / nf);
            }
        }
        Ok(acc / (nf * nf))
    }
}

fn check_gamma(params: &ModelParams) -> Result<f64> {
    let g = params.gamma_n();
    if !(g > 0.0) {
        return Err(Error::Singular("the Poisson equations need gamma_n > 0".into()));
    }
    Ok(g)
}

/// `𝓕_n(h_n)(k, ℓ)`.
pub fn hn_hat(k: f64, l: f64, params: &ModelParams, f: &TestFunction) -> Result<Complex64> {
    let nf = params.n_f64();
    let g = params.gamma_n();
    let (x, y) = (k / nf, l / nf);
    let den = SymbolPair::den(x, y, g);
    if den.norm() == 0.0 {
        return Err(Error::Singular(format!("L_n multiplier vanishes at ({k}, {l})")));
    }
    let num = I * SymbolPair::omega(x, y) * discrete_ft_poisson(f, params.n, k + l);
    Ok(num / (2.0 * nf.sqrt() * den))
}

/// `𝓕_n(v_n)(k, ℓ)` from `𝓕_n(w_n)`.
pub fn vn_hat(k: f64, l: f64, params: &ModelParams, f: &TestFunction) -> Result<Complex64> {
    let nf = params.n_f64();
    let g = check_gamma(params)?;
    let (x, y) = (k / nf, l / nf);
    let num = cis(2.0 * PI * x) + cis(2.0 * PI * y);
    Ok(-num / (nf * SymbolPair::den(x, y, g)) * wn_hat(k + l, params, f)?)
}

/// `𝓕_n(w_n)(ξ) = -(√n/2) I_n(ξ/n) 𝓕_n f(ξ)`.
pub fn wn_hat(xi: f64, params: &ModelParams, f: &TestFunction) -> Result<Complex64> {
    let nf = params.n_f64();
    let y = wrap(xi / nf);
    Ok(-0.5 * nf.sqrt() * residue_ijk(y, params)?.i * discrete_ft_poisson(f, params.n, xi))
}

fn wrap(y: f64) -> f64 {
    y - y.round()
}

/// `h_n`, `w_n`, `v_n` sampled on an `m × m` grid of `[-n/2, n/2)²` (`w_n` on the diagonal sums).
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub n: u64,
    pub m: usize,
    /// Grid coordinates, shared by both axes.
    pub k: Vec<f64>,
    /// Row-major `m × m`.
    pub h_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
    /// `𝓕_n(w_n)` at the 1-D grid.
    pub w_hat: Vec<Complex64>,
    /// Largest relative defect of `L_n ĥ_n` against `𝓕_n(∇_n f ⊗ δ)` over a subgrid.
    pub plug_back: f64,
}

pub fn solve_hn_vn(params: &ModelParams, f: &TestFunction, m: usize) -> Result<PoissonSolution> {
    let g = check_gamma(params)?;
    let nf = params.n_f64();
    let k: Vec<f64> = (0..m).map(|j| -nf / 2.0 + nf * j as f64 / m as f64).collect();
    let pairs: Vec<(f64, f64)> = k.iter().flat_map(|&a| k.iter().map(move |&b| (a, b))).collect();
    let h_hat = pairs.par_iter().map(|&(a, b)| hn_hat(a, b, params, f)).collect::<Result<Vec<_>>>()?;
    let v_hat = pairs.par_iter().map(|&(a, b)| vn_hat(a, b, params, f)).collect::<Result<Vec<_>>>()?;
    let w_hat = k.iter().map(|&xi| wn_hat(xi, params, f)).collect::<Result<Vec<_>>>()?;
    let ops = DiscreteOperators::new(params.n);
    // Checked along anti-diagonals `k + ℓ = s` where `𝓕_n f(s)` is far from zero.
    let stride = (m / 16).max(1);
    let mut plug_back: f64 = 0.0;
    for s in [-1.3, -0.4, 0.35, 1.2] {
        for &a in k.iter().step_by(stride) {
            let b = s - a;
            let lhs = ops.l_n_multiplier(a, b, g) * hn_hat(a, b, params, f)?;
            let rhs = ops.grad_delta_hat(f, a, b)?;
            if rhs.norm() > 1e-12 {
                plug_back = plug_back.max((lhs - rhs).norm() / rhs.norm());
            }
        }
    }
    Ok(PoissonSolution { n: params.n, m, k, h_hat, v_hat, w_hat, plug_back })
}

pub fn g0(y: f64) -> Complex64 {
    if y == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    0.5 * (PI * y).abs().powf(1.5) * Complex64::new(1.0, y.signum())
}

/// Roots of `z² - 2(1+γ)z + w` through `α` and `θ`.
#[derive(Clone, Copy, Debug)]
pub struct Zpm {
    pub w: Complex64,
    /// `α² = 4(1+γ)² sin² πy + [(1+γ)² - 1]²`.
    pub alpha_sq: f64,
    /// Principal argument of `(1+γ)² - w`; its real part is nonnegative.
    pub theta: f64,
    pub minus: Complex64,
    pub plus: Complex64,
}

pub fn zpm(y: f64, gamma: f64) -> Result<Zpm> {
    let w = cis(2.0 * PI * y);
    let g1 = 1.0 + gamma;
    let s = (PI * y).sin();
    let alpha_sq = 4.0 * g1 * g1 * s * s + (g1 * g1 - 1.0).powi(2);
    if alpha_sq == 0.0 {
        return Err(Error::Singular("double root z = 1 at y = 0, gamma = 0".into()));
    }
    let theta = (-(2.0 * PI * y).sin()).atan2(g1 * g1 - (2.0 * PI * y).cos());
    let r = Complex64::from_polar(alpha_sq.sqrt().sqrt(), theta / 2.0);
    let (a, b) = (g1 - r, g1 + r);
    let (minus, plus) = if a.norm() <= b.norm() { (a, b) } else { (b, a) };
    Ok(Zpm { w, alpha_sq, theta, minus, plus })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ijk {
    pub i: Complex64,
    pub j: Complex64,
    pub k: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoRoutes<T> {
    pub quadrature: T,
    pub residue: T,
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 40_000 }
}

/// Points where `den(y-x, x)` is smallest: `x ≡ 0` and `x ≡ y`.
fn breaks(y: f64) -> Vec<f64> {
    vec![0.0, y, 0.5 * y, wrap(y + 0.5) * 0.5]
}

fn quad_on_torus<F: FnMut(f64) -> Complex64>(f: F, y: f64) -> Result<Complex64> {
    Ok(integrate_complex(f, -0.5, 0.5, &breaks(y), quad_opts())?.value)
}

pub fn gn_quadrature(y: f64, gamma: f64) -> Result<Complex64> {
    let v = quad_on_torus(|z| SymbolPair::omega(y - z, z).powi(2) / SymbolPair::den(y - z, z, gamma), y)?;
    Ok(0.25 * v)
}

pub fn gn_residue(y: f64, gamma: f64) -> Result<Complex64> {
    let z = zpm(y, gamma)?;
    let g1 = 1.0 + gamma;
    let w = z.w;
    Ok((w - 1.0).powi(2) / (4.0 * w * w) * (g1 + 2.0 * g1 * g1 / (z.minus - z.plus)))
}

/// `G_n(y)`, `|y| ≤ 1/2`, by both routes.
pub fn gn(y: f64, params: &ModelParams) -> Result<TwoRoutes<Complex64>> {
    if y.abs() > 0.5 {
        return Err(Error::param("y", "must satisfy |y| <= 1/2"));
    }
    let g = params.gamma_n();
    Ok(TwoRoutes { quadrature: gn_quadrature(y, g)?, residue: gn_residue(y, g)? })
}

/// `W(y) = ∫ dx / (Λ² + Ω²)(y-x, x)`.
pub fn w_of_y(y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::Singular("W diverges at y = 0".into()));
    }
    let f = |x: f64| {
        let l = SymbolPair::lambda(y - x, x);
        let o = SymbolPair::omega(y - x, x);
        1.0 / (l * l + o * o)
    };
    // The peak near x ∈ {0, y} has width of order √|y|.
    let s = y.abs().sqrt();
    let mut brk = breaks(y);
    brk.extend([s, -s, y + s, y - s].map(wrap));
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_intervals: 40_000 };
    Ok(integrate_real(f, -0.5, 0.5, &brk, opts)?.0)
}

pub fn ijk_quadrature(y: f64, gamma: f64) -> Result<Ijk> {
    let den = |x: f64| SymbolPair::den(y - x, x, gamma);
    let i = quad_on_torus(|x| I * SymbolPair::omega(y - x, x) * (1.0 - cis(-2.0 * PI * x)) / den(x), y)?;
    let j = quad_on_torus(|x| (1.0 + cis(2.0 * PI * (y - 2.0 * x))) / den(x), y)?;
    let k = quad_on_torus(|x| (cis(2.0 * PI * (y - x)) + cis(2.0 * PI * x)) * (cis(-2.0 * PI * x) - 1.0) / den(x), y)?;
    Ok(Ijk { i, j, k })
}

pub fn residue_ijk(y: f64, params: &ModelParams) -> Result<Ijk> {
    ijk_residue(y, params.gamma_n())
}

pub fn ijk_residue(y: f64, gamma: f64) -> Result<Ijk> {
    let z = zpm(y, gamma)?;
    let g1 = 1.0 + gamma;
    let w = z.w;
    let zm = z.minus;
    let gap = zm * (zm - z.plus);
    let bracket = 1.0 - 2.0 * g1 / w + 2.0 * g1 * (zm - 1.0) / gap;
    let i = -(w - 1.0) / (2.0 * w) * bracket;
    let j = -(g1 / w + g1 / gap);
    // -w/(w-1) · I with the (w-1) cancelled, so y = 0 is regular.
    let k = 0.5 * bracket;
    Ok(Ijk { i, j, k })
}

/// `I_n`, `J_n`, `K_n` at `|y| ≤ 1/2` by both routes.
pub fn ijk(y: f64, params: &ModelParams) -> Result<TwoRoutes<Ijk>> {
    if y.abs() > 0.5 {
        return Err(Error::param("y", "must satisfy |y| <= 1/2"));
    }
    let g = params.gamma_n();
    Ok(TwoRoutes { quadrature: ijk_quadrature(y, g)?, residue: ijk_residue(y, g)? })
}

/// `H(y) = ∫ Ω²/|den|² (y-x, x) dx`, the inner factor of `‖h_n‖²`.
fn h_factor(y: f64, gamma: f64) -> Result<f64> {
    let f = |x: f64| SymbolPair::omega(y - x, x).powi(2) / SymbolPair::den(y - x, x, gamma).norm_sqr();
    Ok(integrate_real(f, -0.5, 0.5, &breaks(y), QuadOptions { abs_tol: 1e-15, rel_tol: 1e-11, max_intervals: 40_000 })?.0)
}

/// `V(y) = ∫ |e^{2iπ(y-x)} + e^{2iπx}|²/|den|² (y-x, x) dx`, the inner factor of `‖v_n‖²`.
fn v_factor(y: f64, gamma: f64) -> Result<f64> {
    let f = |x: f64| (cis(2.0 * PI * (y - x)) + cis(2.0 * PI * x)).norm_sqr() / SymbolPair::den(y - x, x, gamma).norm_sqr();
    Ok(integrate_real(f, -0.5, 0.5, &breaks(y), QuadOptions { abs_tol: 1e-15, rel_tol: 1e-11, max_intervals: 40_000 })?.0)
}

/// Norms of the two decay lemmas at one `n`, all through Parseval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaNorms {
    pub n: u64,
    /// `‖h_n‖²_{2,n}`.
    pub h_sq: f64,
    /// `‖𝒟_n h_n + ¼𝕃f‖²_{2,n}`.
    pub d_h_defect_sq: f64,
    /// `‖¼𝕃f‖²`, the reference for the defect.
    pub quarter_l_sq: f64,
    /// `n^{-3} Σ (𝒟̃_n h_n)²(x, x+1)`, of order one.
    pub d_tilde_h: f64,
    pub v_sq: f64,
    pub d_v_sq: f64,
    pub d_tilde_v: f64,
}

fn lemma_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-16, rel_tol: 1e-9, max_intervals: 20_000 }
}

pub fn lemma_norms(params: &ModelParams, f: &TestFunction) -> Result<LemmaNorms> {
    let g = check_gamma(params)?;
    let nf = params.n_f64();
    let r = f.spectral_radius(1e-18).min(nf / 2.0);
    let fnf = |xi: f64| discrete_ft_poisson(f, params.n, xi);
    let brk = [0.0];
    let mut fail: Option<Error> = None;
    let mut guard = |v: Result<f64>| match v {
        Ok(x) => x,
        Err(e) => {
            fail.get_or_insert(e);
            0.0
        }
    };
    let h_sq = 0.25
        * integrate_real(|xi| fnf(xi).norm_sqr() * guard(h_factor(xi / nf, g)), -r, r, &brk, lemma_opts())?.0;
    let v_sq = 0.25
        * integrate_real(
            |xi| {
                let y = xi / nf;
                let i = guard(ijk_residue(y, g).map(|v| v.i.norm_sqr()));
                fnf(xi).norm_sqr() * i * guard(v_factor(y, g))
            },
            -r,
            r,
            &brk,
            lemma_opts(),
        )?
        .0;
    if let Some(e) = fail {
        return Err(e);
    }
    let rc = f.spectral_radius(1e-18);
    let q_defect = |xi: f64| -> f64 {
        let lim = g0(xi) * f.continuous_ft(xi);
        if xi.abs() >= nf / 2.0 {
            return lim.norm_sqr();
        }
        match gn_residue(xi / nf, g) {
            Ok(gv) => (nf.powf(1.5) * gv * fnf(xi) - lim).norm_sqr(),
            Err(_) => f64::NAN,
        }
    };
    let d_h_defect_sq = integrate_real(q_defect, -rc, rc, &[0.0, -nf / 2.0, nf / 2.0], lemma_opts())?.0;
    let quarter_l_sq = integrate_real(|xi| (g0(xi) * f.continuous_ft(xi)).norm_sqr(), -rc, rc, &brk, lemma_opts())?.0;
    let ijk_at = |xi: f64| ijk_residue(xi / nf, g).unwrap_or(Ijk { i: f64::NAN.into(), j: f64::NAN.into(), k: f64::NAN.into() });
    let n3 = nf.powi(3) / 4.0;
    let d_tilde_h = n3 * integrate_real(|xi| ijk_at(xi).i.norm_sqr() * fnf(xi).norm_sqr(), -r, r, &brk, lemma_opts())?.0;
    let d_v_sq = n3
        * integrate_real(
            |xi| {
                let v = ijk_at(xi);
                (1.0 - cis(2.0 * PI * xi / nf)).norm_sqr() * fnf(xi).norm_sqr() * v.i.norm_sqr() * v.j.norm_sqr()
            },
            -r,
            r,
            &brk,
            lemma_opts(),
        )?
        .0;
    let d_tilde_v = n3
        * integrate_real(
            |xi| {
                let v = ijk_at(xi);
                fnf(xi).norm_sqr() * v.i.norm_sqr() * v.k.norm_sqr()
            },
            -r,
            r,
            &brk,
            lemma_opts(),
        )?
        .0;
    for (name, v) in [("h_sq", h_sq), ("d_tilde_h", d_tilde_h), ("v_sq", v_sq), ("d_v_sq", d_v_sq), ("d_tilde_v", d_tilde_v)] {
        if !v.is_finite() {
            return Err(Error::Resolution { what: format!("lemma norm {name}"), delta: f64::NAN });
        }
    }
    Ok(LemmaNorms { n: params.n, h_sq, d_h_defect_sq, quarter_l_sq, d_tilde_h, v_sq, d_v_sq, d_tilde_v })
}

/// Gap between the lattice-sum and Poisson-sum evaluations of `𝓕_n f`.
pub fn lattice_ft_defect(f: &TestFunction, n: u64, xi: f64) -> Result<f64> {
    Ok((discrete_ft_at(f, n, xi)? - discrete_ft_poisson(f, n, xi)).norm())
}

/// `sup ratio` of a quantity against its bound over a grid; the fitted constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    pub n: u64,
    pub constant: f64,
    pub argmax: f64,
}

fn fit<F: FnMut(f64) -> Result<Option<f64>>>(n: u64, ys: &[f64], mut ratio: F) -> Result<FittedConstant> {
    let mut best = FittedConstant { n, constant: 0.0, argmax: f64::NAN };
    for &y in ys {
        if let Some(r) = ratio(y)? {
            if !(r <= best.constant) {
                best.constant = r;
                best.argmax = y;
            }
        }
    }
    Ok(best)
}

/// Log-spaced `y ∈ [lo, 1/2]`, both signs.
pub fn symmetric_log_grid(lo: f64, m: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), 0.5f64.ln());
    (0..m)
        .map(|j| (a + (b - a) * j as f64 / (m - 1) as f64).exp())
        .flat_map(|y| [y, -y])
        .collect()
}

/// Fitted constants `C` for `|I| ≤ C|s|^{3/2}`, `|J| ≤ C|s|^{-1/2}`, `|K| ≤ C|s|^{1/2}`, `s = sin πy`.
pub fn ijk_constants(params: &ModelParams, ys: &[f64]) -> Result<[FittedConstant; 3]> {
    let g = params.gamma_n();
    let s = |y: f64| (PI * y).sin().abs();
    let ci = fit(params.n, ys, |y| Ok(Some(ijk_residue(y, g)?.i.norm() / s(y).powf(1.5))))?;
    let cj = fit(params.n, ys, |y| Ok(Some(ijk_residue(y, g)?.j.norm() * s(y).sqrt())))?;
    let ck = fit(params.n, ys, |y| Ok(Some(ijk_residue(y, g)?.k.norm() / s(y).sqrt())))?;
    Ok([ci, cj, ck])
}

/// Fitted constant of `|G_n - G_0| ≤ C[s² + γ²|s|^{-1/2} + γ|s|^{1/2}]`.
pub fn gn_minus_g0_constant(params: &ModelParams, ys: &[f64]) -> Result<FittedConstant> {
    let g = params.gamma_n();
    fit(params.n, ys, |y| {
        let s = (PI * y).sin().abs();
        let bound = s * s + g * g / s.sqrt() + g * s.sqrt();
        Ok(Some((gn_residue(y, g)? - g0(y)).norm() / bound))
    })
}

/// Fitted constant of `W(y) ≤ C|y|^{-3/2}`.
pub fn w_constant(ys: &[f64]) -> Result<FittedConstant> {
    fit(0, ys, |y| Ok(Some(w_of_y(y)? * y.abs().powf(1.5))))
}

/// `e^{-4tG_0(ξ)}`, the semigroup multiplier.
pub fn kernel_multiplier(xi: f64, t: f64) -> Complex64 {
    (-4.0 * t * g0(xi)).exp()
}

/// Symbol of `-(1/√2)((-Δ)^{3/4} - ∇(-Δ)^{1/4})` under `∇ ↔ -2iπξ`, `-Δ ↔ (2πξ)²`.
pub fn generator_symbol(xi: f64) -> Complex64 {
    let a = (2.0 * PI * xi).abs();
    let grad = Complex64::new(0.0, -2.0 * PI * xi);
    -(a.powf(1.5) - grad * a.sqrt()) / 2f64.sqrt()
}

/// Largest frequency the inversion may need.
pub const KERNEL_XI_CAP: f64 = 1e4;

/// Exponent below which the multiplier is dropped.
const KERNEL_TAIL: f64 = 46.0;

fn kernel_cutoff(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::param("t", "must be > 0"));
    }
    // |multiplier| = e^{-2t(π|ξ|)^{3/2}}.
    let xi = (KERNEL_TAIL / (2.0 * t)).powf(2.0 / 3.0) / PI;
    if xi > KERNEL_XI_CAP {
        return Err(Error::Truncation { what: format!("kernel inversion at t = {t}"), range: xi.ceil() as i64 });
    }
    Ok(xi)
}

/// `P_t(u) = ∫ e^{-2iπuξ} e^{-4tG_0(ξ)} dξ` with the imaginary part of the computed integral.
pub fn kernel_point(t: f64, u: f64) -> Result<Complex64> {
    let xi = kernel_cutoff(t)?;
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 200_000 };
    let f = |s: f64| cis(-2.0 * PI * u * s) * kernel_multiplier(s, t);
    // Seed one panel per oscillation so the adaptive rule never undersamples.
    let cycles = (u.abs() * xi).ceil() as usize;
    let seeds: Vec<f64> = (1..cycles.min(100_000)).map(|j| xi * j as f64 / cycles as f64).collect();
    let neg: Vec<f64> = seeds.iter().map(|s| -s).collect();
    let right = integrate_complex(f, 0.0, xi, &seeds, opts)?.value;
    let left = integrate_complex(f, -xi, 0.0, &neg, opts)?.value;
    Ok(left + right)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelTable {
    pub t: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Largest `|Im|` of the inversion integral.
    pub imag_residue: f64,
}

/// Required bound on the imaginary residue.
pub const IMAG_RESIDUE_GATE: f64 = 1e-10;

pub fn fractional_kernel(t: f64, u_grid: &[f64]) -> Result<KernelTable> {
    let vals = u_grid.par_iter().map(|&u| kernel_point(t, u)).collect::<Result<Vec<_>>>()?;
    let imag_residue = vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if imag_residue > IMAG_RESIDUE_GATE {
        return Err(Error::Resolution { what: format!("kernel inversion at t = {t} (imaginary residue)"), delta: imag_residue });
    }
    Ok(KernelTable { t, u: u_grid.to_vec(), p: vals.iter().map(|v| v.re).collect(), imag_residue })
}

/// `∫ P_t`: quadrature on `[-A, A]` with `A = 400 t^{2/3}` plus the leading heavy-tail mass
/// `t/(2√π) A^{-3/2}` on the right; the left tail decays like `e^{-c|u|³}`.
pub fn kernel_mass(t: f64) -> Result<f64> {
    let a = 400.0 * t.powf(2.0 / 3.0);
    let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 20_000 };
    let mut fail = None;
    let body = integrate_real(
        |u| match kernel_point(t, u) {
            Ok(v) => v.re,
            Err(e) => {
                fail.get_or_insert(e);
                0.0
            }
        },
        -a,
        a,
        &[0.0],
        opts,
    )?
    .0;
    if let Some(e) = fail {
        return Err(e);
    }
    Ok(body + t / (2.0 * PI.sqrt()) * a.powf(-1.5))
}

/// Third standardized moment of nonnegative weights `w` at points `u`. `P_t` has no third
/// moment, so both the kernel and its lattice counterpart are compared on a common window.
pub fn standardized_third_moment(u: &[f64], w: &[f64]) -> f64 {
    let mass: f64 = w.iter().sum();
    let mean = u.iter().zip(w).map(|(x, p)| x * p).sum::<f64>() / mass;
    let central = |k: i32| u.iter().zip(w).map(|(x, p)| (x - mean).powi(k) * p).sum::<f64>() / mass;
    central(3) / central(2).powf(1.5)
}

/// Cross-correlation `∫ f(v + w) h(v) dv`.
fn cross_correlation(f: &TestFunction, h: &TestFunction, w: f64) -> Result<f64> {
    let r = h.spatial_radius(1e-18);
    let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-12, max_intervals: 5_000 };
    Ok(integrate_real(|v| f.eval(v + w) * h.eval(v), h.center - r, h.center + r, &[h.center], opts)?.0)
}

/// `(2/β²) ∬ f(u) h(v) P_t(u - v)` with `panels` composite Gauss–Legendre panels in `w = u - v`.
pub fn theorem2_target_panels(f: &TestFunction, h: &TestFunction, t: f64, beta: f64, panels: usize) -> Result<f64> {
    kernel_cutoff(t)?;
    if f.is_zero() || h.is_zero() {
        return Ok(0.0);
    }
    let c = f.center - h.center;
    let r = f.spatial_radius(1e-18) + h.spatial_radius(1e-18);
    let rule = CompositeRule::new(20);
    let mut fail = None;
    let v = rule.integrate(
        |w| {
            let p = kernel_point(t, w).and_then(|p| Ok(p.re * cross_correlation(f, h, w)?));
            match p {
                Ok(v) => Complex64::new(v, 0.0),
                Err(e) => {
                    fail.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        c - r,
        c + r,
        panels,
    );
    if let Some(e) = fail {
        return Err(e);
    }
    Ok(2.0 / (beta * beta) * v.re)
}

/// Panel count resolving the kernel width `t^{2/3}` across the support of `f ⋆ h`.
pub fn theorem2_panels(f: &TestFunction, h: &TestFunction, t: f64) -> usize {
    let r = f.spatial_radius(1e-18) + h.spatial_radius(1e-18);
    ((2.0 * r / (0.5 * t.powf(2.0 / 3.0))).ceil() as usize).max(16)
}

pub fn theorem2_target(f: &TestFunction, h: &TestFunction, t: f64, beta: f64) -> Result<f64> {
    theorem2_target_panels(f, h, t, beta, theorem2_panels(f, h, t))
}
