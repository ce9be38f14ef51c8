//! Fourier conventions, test functions and spectral grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice sums stop once `|f(x/n)|` stays below this floor.
pub const TRUNCATION_FLOOR: f64 = 1e-14;
const MAX_LATTICE_RANGE: i64 = 100_000_000;

/// `f(x) = Σ_k coeffs[k] s^k e^{-π s²}` with `s = (x - center)/width`.
///
/// The family is closed under the continuous transform, so `𝓕f` is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: f64,
    pub width: f64,
    pub coeffs: Vec<f64>,
}

impl TestFunction {
    pub fn new(center: f64, width: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::param("width", "must be positive and finite"));
        }
        if !center.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("coeffs", "must be finite"));
        }
        Ok(TestFunction { center, width, coeffs })
    }

    /// `e^{-πx²}`, its own transform.
    pub fn gaussian() -> Self {
        TestFunction { center: 0.0, width: 1.0, coeffs: vec![1.0] }
    }

    pub fn scaled_gaussian(center: f64, width: f64) -> Self {
        TestFunction { center, width, coeffs: vec![1.0] }
    }

    pub fn zero() -> Self {
        TestFunction { center: 0.0, width: 1.0, coeffs: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Schwartz functions decay faster than any power; this is the order reported.
    pub fn decay_order(&self) -> u32 {
        16
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.width;
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc * (-PI * s * s).exp()
    }

    /// `𝓕f(ξ) = ∫ f(x) e^{2iπξx} dx`.
    pub fn continuous_ft(&self, xi: f64) -> Complex64 {
        if self.coeffs.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        // m_k(η) = ∫ s^k e^{-πs²} e^{2iπηs} ds obeys m_{k+1} = iη m_k + k/(2π) m_{k-1}.
        let eta = self.width * xi;
        let m0 = Complex64::new((-PI * eta * eta).exp(), 0.0);
        let mut prev = Complex64::new(0.0, 0.0);
        let mut cur = m0;
        let mut acc = cur * self.coeffs[0];
        for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
            let next = Complex64::new(0.0, eta) * cur + prev * ((k - 1) as f64 / (2.0 * PI));
            prev = cur;
            cur = next;
            acc += cur * c;
        }
        acc * Complex64::from_polar(self.width, 2.0 * PI * xi * self.center)
    }

    /// Radius beyond which `|𝓕f| < eps · Σ|coeffs|`.
    pub fn spectral_radius(&self, eps: f64) -> f64 {
        let deg = self.coeffs.len().saturating_sub(1) as f64;
        let eta = ((1.0 / eps).ln() / PI).sqrt() + 0.5 * deg + 0.5;
        eta / self.width
    }

    /// Radius around `center` beyond which `|f| < eps · Σ|coeffs|`.
    pub fn spatial_radius(&self, eps: f64) -> f64 {
        self.spectral_radius(eps) * self.width * self.width
    }

    /// `∫ f(x)² dx`, closed form via the transform (Parseval) on a fine rule.
    pub fn l2_norm_sq(&self) -> f64 {
        let r = self.spatial_radius(1e-18);
        let rule = crate::quad::CompositeRule::new(20);
        rule.integrate(|x| Complex64::new(self.eval(x).powi(2), 0.0), self.center - r, self.center + r, 64)
            .re
    }
}

/// Uniform periodic grid `ξ_j = lo + j (hi - lo)/m`, `j = 0..m`; `hi` is identified with `lo`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub lo: f64,
    pub hi: f64,
    pub m: usize,
}

impl SpectralGrid {
    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::param("m", "grid needs at least 2 points"));
        }
        if !(hi > lo) {
            return Err(Error::param("hi", "must exceed lo"));
        }
        Ok(SpectralGrid { lo, hi, m })
    }

    /// `[-n/2, n/2)` with `8 n` points.
    pub fn centered(n: u64) -> Self {
        let h = n as f64 / 2.0;
        SpectralGrid { lo: -h, hi: h, m: 8 * n as usize }
    }

    pub fn torus(m: usize) -> Self {
        SpectralGrid { lo: -0.5, hi: 0.5, m }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.m as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.lo + self.step() * j as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(|j| self.point(j))
    }
}

/// Complex samples on a [`SpectralGrid`], integrated with weight `step()`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFunction {
    pub grid: SpectralGrid,
    pub values: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn quadrature_weight(&self) -> f64 {
        self.grid.step()
    }

    pub fn integral(&self) -> Complex64 {
        crate::sum::pairwise_complex(&self.values) * self.quadrature_weight()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        crate::sum::pairwise(&sq) * self.quadrature_weight()
    }
}

/// Integer range `[lo, hi]` outside which `|f(x/n)|` stays below the floor.
pub fn lattice_support(f: &TestFunction, n: u64) -> Result<(i64, i64)> {
    let nf = n as f64;
    let x0 = (f.center * nf).round() as i64;
    let run = (n as i64).max(8);
    let scan = |dir: i64| -> Result<i64> {
        let mut quiet = 0;
        let mut x = x0;
        let mut last_loud = x0;
        loop {
            if f.eval(x as f64 / nf).abs() >= TRUNCATION_FLOOR {
                quiet = 0;
                last_loud = x;
            } else {
                quiet += 1;
                if quiet >= run {
                    return Ok(last_loud);
                }
            }
            x += dir;
            if (x - x0).abs() > MAX_LATTICE_RANGE {
                return Err(Error::Truncation {
                    what: "test function samples".into(),
                    range: MAX_LATTICE_RANGE,
                });
            }
        }
    };
    Ok((scan(-1)?, scan(1)?))
}

/// `𝓕_n f(ξ) = (1/n) Σ_x f(x/n) e^{2iπxξ/n}` on every grid point.
///
/// When the grid spacing divides a period of the phase, samples are folded modulo that
/// period and a single FFT produces the exact sum; otherwise the sum is taken directly.
pub fn discrete_ft(f: &TestFunction, n: u64, grid: &SpectralGrid) -> Result<SpectralFunction> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if f.is_zero() {
        return Ok(SpectralFunction { grid: *grid, values: vec![Complex64::new(0.0, 0.0); grid.m] });
    }
    let (lo, hi) = lattice_support(f, n)?;
    let nf = n as f64;
    let period = nf * grid.m as f64 / (grid.hi - grid.lo);
    let p = period.round();
    let values = if (period - p).abs() < 1e-9 * period && p >= grid.m as f64 && p <= 1e8 {
        let p = p as usize;
        let mut buf = vec![Complex64::new(0.0, 0.0); p];
        for x in lo..=hi {
            let phase = 2.0 * PI * ((x as f64 * grid.lo / nf) % 1.0);
            buf[x.rem_euclid(p as i64) as usize] += Complex64::from_polar(f.eval(x as f64 / nf), phase);
        }
        FftPlanner::new().plan_fft_inverse(p).process(&mut buf);
        buf.truncate(grid.m);
        buf.iter().map(|v| v / nf).collect()
    } else {
        grid.points().map(|xi| direct_sum(f, n, lo, hi, xi)).collect()
    };
    Ok(SpectralFunction { grid: *grid, values })
}

fn direct_sum(f: &TestFunction, n: u64, lo: i64, hi: i64, xi: f64) -> Complex64 {
    let nf = n as f64;
    let terms: Vec<Complex64> = (lo..=hi)
        .map(|x| Complex64::from_polar(f.eval(x as f64 / nf), 2.0 * PI * x as f64 * xi / nf))
        .collect();
    crate::sum::pairwise_complex(&terms) / nf
}

/// `𝓕_n f(ξ)` at one point by direct lattice summation.
pub fn discrete_ft_at(f: &TestFunction, n: u64, xi: f64) -> Result<Complex64> {
    if f.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (lo, hi) = lattice_support(f, n)?;
    Ok(direct_sum(f, n, lo, hi, xi))
}

/// `𝓕_n f(ξ) = Σ_k 𝓕f(ξ + kn)` (Poisson summation), exact for the closed-form family.
pub fn discrete_ft_poisson(f: &TestFunction, n: u64, xi: f64) -> Complex64 {
    let nf = n as f64;
    let r = f.spectral_radius(1e-20);
    let kmin = ((-r - xi) / nf).ceil() as i64;
    let kmax = ((r - xi) / nf).floor() as i64;
    (kmin..=kmax).map(|k| f.continuous_ft(xi + k as f64 * nf)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inversion {
    pub value: Complex64,
    /// `|x|` reaches half the alias period `n / step` of the grid.
    pub aliased: bool,
}

/// `∫ s(ξ) e^{-2iπxξ/n} dξ` by the grid rule.
pub fn inverse_discrete_ft(s: &SpectralFunction, n: u64, x: i64) -> Inversion {
    let nf = n as f64;
    let terms: Vec<Complex64> = s
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * x as f64 * s.grid.point(j) / nf))
        .collect();
    let alias_period = nf / s.grid.step();
    Inversion {
        value: crate::sum::pairwise_complex(&terms) * s.quadrature_weight(),
        aliased: 2.0 * (x.abs() as f64) >= alias_period,
    }
}

/// `sup_{|y| ≤ 1/2} |𝓕_n f(ny)| (1 + (n|y|)^p)` on the centered grid.
pub fn decay_constant(f: &TestFunction, n: u64, p: u32) -> Result<f64> {
    if p < 1 {
        return Err(Error::param("p", "must be >= 1"));
    }
    let grid = SpectralGrid::centered(n);
    let s = discrete_ft(f, n, &grid)?;
    Ok(s.values
        .iter()
        .enumerate()
        .map(|(j, v)| v.norm() * (1.0 + grid.point(j).abs().powi(p as i32)))
        .fold(0.0, f64::max))
}

/// `(1/n) Σ_x f(x/n)²`.
pub fn lattice_norm_sq(f: &TestFunction, n: u64) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let (lo, hi) = lattice_support(f, n)?;
    let nf = n as f64;
    let sq: Vec<f64> = (lo..=hi).map(|x| f.eval(x as f64 / nf).powi(2)).collect();
    Ok(crate::sum::pairwise(&sq) / nf)
}

/// `∫_{-n/2}^{n/2} |ξ|^p |𝓕_n f(ξ) - 𝓕f(ξ)|² dξ` on the centered grid.
pub fn sobolev_gap(f: &TestFunction, n: u64, p: u32) -> Result<f64> {
    let grid = SpectralGrid::centered(n);
    let s = discrete_ft(f, n, &grid)?;
    let terms: Vec<f64> = s
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let xi = grid.point(j);
            xi.abs().powi(p as i32) * (v - f.continuous_ft(xi)).norm_sqr()
        })
        .collect();
    Ok(crate::sum::pairwise(&terms) * grid.step())
}
