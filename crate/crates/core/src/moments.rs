//! Closed moment dynamics of the random linear flow `v(t) = M(t) e_0`.
//!
//! The generator maps degree-2 polynomials to degree-2 polynomials, so
//! `C(x,y) = E[v_x v_y]` obeys a closed linear ODE:
//!
//! ```text
//! dC/dt(x,y) = C(x+1,y) - C(x-1,y) + C(x,y+1) - C(x,y-1)
//!            - 4γ C(x,y) 𝟙{x≠y}
//!            + λ Σ_{bonds b touching {x,y}} [C(π_b x, π_b y) - C(x,y)]
//! ```
//!
//! Two solvers are provided. The dense one stores the packed upper triangle and
//! steps RK4; it is cheap for small rings and serves as the reference. The
//! momentum-resolved one is exact in time and scales to the rings the
//! scaling limits need; see [`MomentumMode`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::chain::{outer_mass_fraction, FINITE_SIZE_GATE};
use crate::error::{Error, Result};
use crate::fourier::{lattice_support, TestFunction};
use crate::params::ModelParams;
use crate::quad::{integrate_complex, QuadOptions};

/// Trace drift beyond this aborts a dense evolution.
pub const TRACE_GATE: f64 = 1e-6;

/// Packed symmetric `L × L` matrix; entry `(x, y)` with `x ≤ y` is stored once.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCorrelation {
    pub l: usize,
    pub packed: Vec<f64>,
    pub time: f64,
}

#[inline]
fn packed_index(l: usize, x: usize, y: usize) -> usize {
    // Row x starts after Σ_{i<x} (L - i) = xL - x(x-1)/2 entries.
    x * l - x * x.saturating_sub(1) / 2 + (y - x)
}

impl PairCorrelation {
    pub fn zeros(l: usize) -> Self {
        PairCorrelation { l, packed: vec![0.0; l * (l + 1) / 2], time: 0.0 }
    }

    /// Flow initial data `C = e_0 e_0ᵀ`.
    pub fn flow_initial(l: usize) -> Self {
        let mut c = Self::zeros(l);
        c.packed[0] = 1.0;
        c
    }

    pub fn from_dense(l: usize, dense: &[f64]) -> Self {
        let mut c = Self::zeros(l);
        for x in 0..l {
            for y in x..l {
                c.set(x, y, 0.5 * (dense[x * l + y] + dense[y * l + x]));
            }
        }
        c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        self.packed[packed_index(self.l, x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let i = packed_index(self.l, x, y);
        self.packed[i] = v;
    }

    pub fn trace(&self) -> f64 {
        crate::sum::pairwise(&self.diagonal())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.l).map(|x| self.get(x, x)).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let l = self.l;
        (0..l * l).map(|i| self.get(i / l, i % l)).collect()
    }
}

/// `m_x = E[v_x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstMoment {
    pub m: Vec<f64>,
    pub time: f64,
}

/// Matrix-free generator of `dC/dt = G C` on a ring.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairGenerator {
    pub l: usize,
    pub lambda: f64,
    pub gamma: f64,
}

pub fn build_pair_generator(params: &ModelParams, l: usize) -> Result<PairGenerator> {
    if l < 4 {
        return Err(Error::param("L", format!("ring needs at least 4 sites, got {l}")));
    }
    Ok(PairGenerator { l, lambda: params.lambda, gamma: params.gamma_n() })
}

impl PairGenerator {
    /// Emits `(u, v, coefficient)` for every term of row `(x, y)`; a term multiplies `C(u, v)`.
    pub fn for_each_term(&self, x: usize, y: usize, mut emit: impl FnMut(usize, usize, f64)) {
        let l = self.l;
        let up = |i: usize| (i + 1) % l;
        let dn = |i: usize| (i + l - 1) % l;
        emit(up(x), y, 1.0);
        emit(dn(x), y, -1.0);
        emit(x, up(y), 1.0);
        emit(x, dn(y), -1.0);
        if x != y {
            emit(x, y, -4.0 * self.gamma);
        }
        if self.lambda != 0.0 {
            // Bond b swaps sites b and b+1; only bonds touching x or y act.
            let mut bonds = [dn(x), x, dn(y), y];
            bonds.sort_unstable();
            let mut prev = usize::MAX;
            for &b in &bonds {
                if b == prev {
                    continue;
                }
                prev = b;
                let swap = |i: usize| {
                    if i == b {
                        up(b)
                    } else if i == up(b) {
                        b
                    } else {
                        i
                    }
                };
                emit(swap(x), swap(y), self.lambda);
                emit(x, y, -self.lambda);
            }
        }
    }

    pub fn apply(&self, c: &PairCorrelation, out: &mut [f64]) {
        let l = self.l;
        let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(l);
        let mut rest = out;
        for x in 0..l {
            let (head, tail) = rest.split_at_mut(l - x);
            rows.push((x, head));
            rest = tail;
        }
        rows.into_par_iter().for_each(|(x, row)| {
            for (k, slot) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                self.for_each_term(x, x + k, |u, v, w| acc += w * c.get(u, v));
                *slot = acc;
            }
        });
    }

    /// Largest stable RK4 step for this generator.
    pub fn max_dt(&self) -> f64 {
        0.5 / (1.0 + 4.0 * self.lambda + 4.0 * self.gamma)
    }
}

#[derive(Clone, Debug)]
pub struct PairEvolution {
    pub c: PairCorrelation,
    pub trace_drift: f64,
    pub steps: usize,
}

/// Classic RK4 from `c0.time` to `c0.time + t`; the step is `t / ⌈t/dt⌉`.
pub fn evolve_pair(c0: &PairCorrelation, generator: &PairGenerator, t: f64, dt: f64) -> Result<PairEvolution> {
    if !(t >= 0.0) {
        return Err(Error::param("T", "must be >= 0"));
    }
    if !(dt > 0.0) || dt > generator.max_dt() * (1.0 + 1e-12) {
        return Err(Error::param("dt", format!("must lie in (0, {}]", generator.max_dt())));
    }
    if c0.l != generator.l {
        return Err(Error::param("L", "correlation and generator sizes differ"));
    }
    let mut c = c0.clone();
    if t == 0.0 {
        return Ok(PairEvolution { c, trace_drift: 0.0, steps: 0 });
    }
    let steps = (t / dt).ceil() as usize;
    let h = t / steps as f64;
    let tr0 = c0.trace();
    let len = c.packed.len();
    let mut k = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut stage = c.clone();
    let mut drift = 0.0;
    for step in 0..steps {
        generator.apply(&c, &mut k[0]);
        for (s, (a, d)) in stage.packed.iter_mut().zip(c.packed.iter().zip(&k[0])) {
            *s = a + 0.5 * h * d;
        }
        generator.apply(&stage, &mut k[1]);
        for (s, (a, d)) in stage.packed.iter_mut().zip(c.packed.iter().zip(&k[1])) {
            *s = a + 0.5 * h * d;
        }
        generator.apply(&stage, &mut k[2]);
        for (s, (a, d)) in stage.packed.iter_mut().zip(c.packed.iter().zip(&k[2])) {
            *s = a + h * d;
        }
        generator.apply(&stage, &mut k[3]);
        for i in 0..len {
            c.packed[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        drift = (c.trace() - tr0).abs();
        if !(drift <= TRACE_GATE) {
            return Err(Error::Unstable(format!(
                "trace drift {drift:e} after step {} of {steps} (h = {h})",
                step + 1
            )));
        }
    }
    c.time = c0.time + t;
    Ok(PairEvolution { c, trace_drift: drift, steps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    /// Indexed by ring site `z ∈ [0, L)`.
    pub kernel: Vec<f64>,
    /// Trace drift for dense runs; `|Σ S / (2β^{-2}) - 1|` for momentum runs.
    pub trace_drift: f64,
    pub outer_mass_fraction: f64,
    pub finite_size_warning: bool,
}

impl KernelResult {
    fn new(kernel: Vec<f64>, trace_drift: f64) -> Self {
        let outer = outer_mass_fraction(&kernel);
        KernelResult { kernel, trace_drift, outer_mass_fraction: outer, finite_size_warning: outer > FINITE_SIZE_GATE }
    }
}

/// `S(z) = 2β^{-2} C(z,z)` at physical time `t n^a`, dense route.
pub fn energy_kernel(params: &ModelParams, t: f64, l: usize, dt: f64) -> Result<KernelResult> {
    let generator = build_pair_generator(params, l)?;
    let ev = evolve_pair(&PairCorrelation::flow_initial(l), &generator, params.horizon(t), dt)?;
    let scale = 2.0 / (params.beta * params.beta);
    let kernel = ev.c.diagonal().into_iter().map(|v| scale * v).collect();
    Ok(KernelResult::new(kernel, ev.trace_drift))
}

fn first_moment_rhs(m: &[f64], lambda: f64, gamma: f64, out: &mut [f64]) {
    let l = m.len();
    for x in 0..l {
        let up = m[(x + 1) % l];
        let dn = m[(x + l - 1) % l];
        out[x] = up - dn - 2.0 * gamma * m[x] + lambda * (up + dn - 2.0 * m[x]);
    }
}

/// Integrates `dm/dt = m(x+1) - m(x-1) - 2γ m + λ Δm` from `β^{-1} e_0` to `t n^a` by RK4.
pub fn volume_kernel(params: &ModelParams, t: f64, l: usize, dt: f64) -> Result<KernelResult> {
    if l < 4 {
        return Err(Error::param("L", format!("ring needs at least 4 sites, got {l}")));
    }
    let gamma = params.gamma_n();
    let bound = 0.5 / (1.0 + 4.0 * params.lambda + 4.0 * gamma);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::param("dt", format!("must lie in (0, {bound}]")));
    }
    let horizon = params.horizon(t);
    let mut m = vec![0.0; l];
    m[0] = params.beta.recip();
    if horizon > 0.0 {
        let steps = (horizon / dt).ceil() as usize;
        let h = horizon / steps as f64;
        let mut k1 = vec![0.0; l];
        let mut k2 = vec![0.0; l];
        let mut k3 = vec![0.0; l];
        let mut k4 = vec![0.0; l];
        let mut tmp = vec![0.0; l];
        for _ in 0..steps {
            first_moment_rhs(&m, params.lambda, gamma, &mut k1);
            for i in 0..l {
                tmp[i] = m[i] + 0.5 * h * k1[i];
            }
            first_moment_rhs(&tmp, params.lambda, gamma, &mut k2);
            for i in 0..l {
                tmp[i] = m[i] + 0.5 * h * k2[i];
            }
            first_moment_rhs(&tmp, params.lambda, gamma, &mut k3);
            for i in 0..l {
                tmp[i] = m[i] + h * k3[i];
            }
            first_moment_rhs(&tmp, params.lambda, gamma, &mut k4);
            for i in 0..l {
                m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    let mass = crate::sum::pairwise(&m) * params.beta;
    let drift = (mass - (-2.0 * gamma * horizon).exp()).abs();
    Ok(KernelResult::new(m, drift))
}

/// Signed offset of ring site `z`: `z` for `z ≤ L/2`, else `z - L`.
#[inline]
pub fn signed_offset(z: usize, l: usize) -> i64 {
    if z <= l / 2 {
        z as i64
    } else {
        z as i64 - l as i64
    }
}

/// `(1/n) Σ_y h(y/n) Σ_z f((y+z)/n) K(z)` with ring offsets read as signed.
pub fn pair_field(kernel: &[f64], f: &TestFunction, h: &TestFunction, n: u64) -> Result<f64> {
    if f.is_zero() || h.is_zero() || kernel.iter().all(|&k| k == 0.0) {
        return Ok(0.0);
    }
    let l = kernel.len();
    let (flo, fhi) = lattice_support(f, n)?;
    let (hlo, hhi) = lattice_support(h, n)?;
    let nf = n as f64;
    let zmin = -((l as i64 - 1) / 2);
    let zmax = l as i64 / 2;
    let fvals: Vec<f64> = (flo..=fhi).map(|x| f.eval(x as f64 / nf)).collect();
    let rows: Vec<f64> = (hlo..=hhi)
        .into_par_iter()
        .map(|y| {
            let lo = (flo - y).max(zmin);
            let hi = (fhi - y).min(zmax);
            let mut acc = 0.0;
            for z in lo..=hi {
                acc += fvals[(y + z - flo) as usize] * kernel[z.rem_euclid(l as i64) as usize];
            }
            h.eval(y as f64 / nf) * acc
        })
        .collect();
    Ok(crate::sum::pairwise(&rows) / nf)
}

/// One momentum sector `p` of the pair dynamics.
///
/// With `Ĉ(p, r) = Σ_x C(x, x+r) e^{2iπpx}` the generator decouples into independent
/// problems in the relative coordinate `r ∈ ℤ`: a constant-coefficient tridiagonal
/// bulk plus a rank-3 defect on `r ∈ {-1, 0, 1}` carrying the flip damping and the
/// exchange corrections. The Laplace transform of the bulk is a free resolvent with
/// entries `G(m) ∝ z^{-|m|}`; the defect is added by a 3×3 Dyson equation. Inverting
/// the Laplace transform along the spectrum `s(ζ) = a₀ + σ(ζ + 1/ζ)`, `|ζ| = 1`, and
/// adding the residues at bound states `|ζ| > 1` gives `Ĉ(p, 0, T)` exactly.
#[derive(Clone, Debug)]
pub struct MomentumMode {
    a_minus: Complex64,
    a0: Complex64,
    sigma: Complex64,
    nu: Complex64,
    defect: [[Complex64; 3]; 3],
}

type M3 = [[Complex64; 3]; 3];

fn solve3(mut a: M3, mut b: [Complex64; 3]) -> Option<[Complex64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

fn det3(m: &M3) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Roots of `Σ coeffs[k] z^k` by Aberth–Ehrlich iteration.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut deg = coeffs.len().saturating_sub(1);
    while deg > 0 && coeffs[deg].norm() <= 1e-13 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let c = &coeffs[..=deg];
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = c[deg];
        let mut dp = Complex64::new(0.0, 0.0);
        for k in (0..deg).rev() {
            dp = dp * z + p;
            p = p * z + c[k];
        }
        (p, dp)
    };
    // Cauchy bound for the initial circle.
    let radius = 1.0 + c[..deg].iter().map(|a| (a / c[deg]).norm()).fold(0.0, f64::max);
    let r0 = radius.min(1e6);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| Complex64::from_polar(0.5 * r0, 2.0 * PI * (k as f64 + 0.25) / deg as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut repulse = Complex64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    repulse += (z[i] - z[j]).inv();
                }
            }
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulse);
            z[i] -= w;
            moved = moved.max(w.norm() / z[i].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

impl MomentumMode {
    /// Requires `λ > 0`: the bulk symbol degenerates without exchange.
    pub fn new(lambda: f64, gamma: f64, p: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::param("lambda", "momentum route needs lambda > 0"));
        }
        let e = Complex64::from_polar(1.0, -2.0 * PI * p);
        let ep = e.conj();
        let one = Complex64::new(1.0, 0.0);
        let a_minus = (e - one) + (e + one) * lambda;
        let a_plus = (one - ep) + (ep + one) * lambda;
        let a0 = Complex64::new(-4.0 * lambda - 4.0 * gamma, 0.0);
        let sigma = (a_plus * a_minus).sqrt();
        let nu = sigma / a_minus;
        let l = Complex64::new(lambda, 0.0);
        // Rows and columns ordered r = -1, 0, 1.
        let defect = [
            [l, -(one + ep) * lambda, ep * lambda],
            [-(one + e) * lambda, (ep + e + 2.0) * lambda + 4.0 * gamma, -(one + ep) * lambda],
            [e * lambda, -(one + e) * lambda, l],
        ];
        Ok(MomentumMode { a_minus, a0, sigma, nu, defect })
    }

    pub fn s_of(&self, zeta: Complex64) -> Complex64 {
        self.a0 + self.sigma * (zeta + zeta.inv())
    }

    /// Unnormalized free resolvent block `M(r - r')` with `z₁ = ν/ζ`, `z₂ = νζ`.
    fn bulk_block(&self, zeta: Complex64) -> M3 {
        let z1 = self.nu / zeta;
        let z2 = self.nu * zeta;
        let g = |m: i32| if m <= 0 { z1.powi(-m) } else { z2.powi(-m) };
        let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = g(i as i32 - k as i32);
            }
        }
        out
    }

    /// `R₀₀(ζ)`, the return amplitude of the defect-dressed resolvent.
    pub fn r00(&self, zeta: Complex64) -> Complex64 {
        let m = self.bulk_block(zeta);
        let pref = (self.a_minus * (self.nu * zeta - self.nu / zeta)).inv();
        let mut a = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..3 {
                    acc += m[i][j] * self.defect[j][k];
                }
                a[i][k] = if i == k { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) } - pref * acc;
            }
        }
        let rhs = [pref * m[0][1], pref * m[1][1], pref * m[2][1]];
        match solve3(a, rhs) {
            Some(x) => x[1],
            None => Complex64::new(f64::NAN, f64::NAN),
        }
    }

    /// `det[ζ²(σ(ζ - 1/ζ) I - M D)]`, a polynomial of degree ≤ 9 in `ζ`.
    fn det_q(&self, zeta: Complex64) -> Complex64 {
        let m = self.bulk_block(zeta);
        let diag = self.sigma * (zeta - zeta.inv());
        let mut q = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..3 {
                    acc += m[i][j] * self.defect[j][k];
                }
                let d = if i == k { diag } else { Complex64::new(0.0, 0.0) };
                q[i][k] = (d - acc) * zeta * zeta;
            }
        }
        det3(&q)
    }

    /// Poles of `R₀₀` outside the unit circle; spurious roots at `ζ = ±1` are dropped.
    pub fn bound_states(&self) -> Vec<Complex64> {
        const K: usize = 16;
        let vals: Vec<Complex64> = (0..K)
            .map(|j| self.det_q(Complex64::from_polar(1.0, 2.0 * PI * j as f64 / K as f64)))
            .collect();
        let coeffs: Vec<Complex64> = (0..10)
            .map(|k| {
                vals.iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / K as f64))
                    .sum::<Complex64>()
                    / K as f64
            })
            .collect();
        polynomial_roots(&coeffs)
            .into_iter()
            .filter(|z| z.norm() > 1.0 + 1e-12)
            .filter(|z| (z - 1.0).norm() > 1e-6 && (z + 1.0).norm() > 1e-6)
            .collect()
    }

    /// `Ĉ(p, 0, T)` for flow initial data.
    pub fn diagonal_transform(&self, t: f64) -> Result<Complex64> {
        let roots = self.bound_states();
        let mut total = Complex64::new(0.0, 0.0);
        for (i, &zb) in roots.iter().enumerate() {
            let mut radius = 1e-4 * zb.norm();
            radius = radius.min(0.3 * (zb.norm() - 1.0));
            for (j, &other) in roots.iter().enumerate() {
                if j != i {
                    radius = radius.min(0.3 * (zb - other).norm());
                }
            }
            const K: usize = 64;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..K {
                let d = Complex64::from_polar(radius, 2.0 * PI * k as f64 / K as f64);
                let z = zb + d;
                acc += self.r00(z) * self.sigma * (1.0 - (z * z).inv()) * d;
            }
            let residue = acc / K as f64;
            let sb = self.s_of(zb);
            if sb.re * t > -745.0 {
                total += (sb * t).exp() * residue;
            }
        }
        let envelope = self.a0.re + 2.0 * self.sigma.re.abs();
        if envelope * t > -740.0 {
            let integrand = |phi: f64| {
                let z = Complex64::from_polar(1.0, phi);
                (self.s_of(z) * t).exp() * self.r00(z) * self.sigma * (1.0 - (z * z).inv()) * z / (2.0 * PI)
            };
            // Cancellation on the unit circle limits attainable accuracy to about 1e-13 absolute.
            let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 400_000 };
            let upper = integrate_complex(integrand, 0.0, PI, &[], opts)?;
            let lower = integrate_complex(integrand, PI, 2.0 * PI, &[], opts)?;
            total += upper.value + lower.value;
        }
        Ok(total)
    }
}

/// Consecutive negligible sectors after which the momentum sum stops.
const MODE_TAIL_RUN: usize = 8;
const MODE_FLOOR: f64 = 1e-15;

/// `Ĉ_j = Ĉ(j/L, 0, T)` for `j = 0..=J`, stopping once the transform is negligible.
pub fn diagonal_spectrum(lambda: f64, gamma: f64, l: usize, t: f64) -> Result<Vec<Complex64>> {
    let half = l / 2;
    let mut out = vec![Complex64::new(1.0, 0.0)];
    let mut quiet = 0;
    let block = 32;
    let mut j = 1;
    while j <= half {
        let hi = (j + block).min(half + 1);
        let vals: Vec<Complex64> = (j..hi)
            .into_par_iter()
            .map(|k| MomentumMode::new(lambda, gamma, k as f64 / l as f64)?.diagonal_transform(t))
            .collect::<Result<_>>()?;
        for v in vals {
            out.push(v);
            quiet = if v.norm() < MODE_FLOOR { quiet + 1 } else { 0 };
            if quiet >= MODE_TAIL_RUN {
                return Ok(out);
            }
        }
        j = hi;
    }
    Ok(out)
}

/// `S(z) = 2β^{-2} C(z, z)` at physical time `t n^a`, momentum route.
pub fn energy_kernel_momentum(params: &ModelParams, t: f64, l: usize) -> Result<KernelResult> {
    if l < 4 {
        return Err(Error::param("L", format!("ring needs at least 4 sites, got {l}")));
    }
    let spectrum = diagonal_spectrum(params.lambda, params.gamma_n(), l, params.horizon(t))?;
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (j, v) in spectrum.iter().enumerate() {
        if j == 0 {
            buf[0] = *v;
        } else if 2 * j == l {
            buf[j] = Complex64::new(v.re, 0.0);
        } else {
            buf[j] = *v;
            buf[l - j] = v.conj();
        }
    }
    // S(z) = (1/L) Σ_j Ĉ_j e^{-2iπjz/L}: a forward transform.
    FftPlanner::new().plan_fft_forward(l).process(&mut buf);
    let scale = 2.0 / (params.beta * params.beta) / l as f64;
    let kernel: Vec<f64> = buf.iter().map(|v| v.re * scale).collect();
    let mass = crate::sum::pairwise(&kernel) * params.beta * params.beta / 2.0;
    Ok(KernelResult::new(kernel, (mass - 1.0).abs()))
}
