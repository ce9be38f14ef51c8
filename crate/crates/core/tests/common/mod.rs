//! Oracles shared by the integration tests. None of them call into the crate's
//! quadrature or solvers.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Adaptive Simpson with Richardson correction; `rel` is relative to `∫|f|` from a 256-point scan.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64) -> f64 {
    simpson_floor(f, a, b, rel, 1e-300, 256)
}

/// [`simpson`] with an absolute floor on the tolerance and a chosen scan size.
pub fn simpson_floor<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64, abs: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let scale = (0..=panels).map(|j| f(a + j as f64 * h).abs()).sum::<f64>() * h;
    let tol = (rel * scale).max(abs) / panels as f64;
    (0..panels)
        .map(|j| {
            let (lo, hi) = (a + j as f64 * h, a + (j + 1) as f64 * h);
            let m = 0.5 * (lo + hi);
            let (fa, fm, fb) = (f(lo), f(m), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(f, lo, hi, fa, fm, fb, whole, tol, 30)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Stable density in the S0 parametrization, unit scale, `α ≠ 1`, from the
/// single-integral representation over `θ ∈ (-θ₀, π/2)`.
pub fn stable_s0(x: f64, alpha: f64, beta: f64) -> f64 {
    let zeta = -beta * (PI * alpha / 2.0).tan();
    if (x - zeta).abs() < 1e-9 {
        let theta0 = (beta * (PI * alpha / 2.0).tan()).atan() / alpha;
        return gamma_fn(1.0 + 1.0 / alpha) * theta0.cos() / (PI * (1.0 + zeta * zeta).powf(0.5 / alpha));
    }
    if x < zeta {
        return stable_s0(-x, alpha, -beta);
    }
    let theta0 = (beta * (PI * alpha / 2.0).tan()).atan() / alpha;
    let d = x - zeta;
    let e = alpha / (alpha - 1.0);
    let v = |th: f64| -> f64 {
        let s = (alpha * (theta0 + th)).sin();
        if s <= 0.0 {
            return f64::INFINITY;
        }
        (alpha * theta0).cos().powf(1.0 / (alpha - 1.0)) * (th.cos() / s).powf(e) * (alpha * theta0 + (alpha - 1.0) * th).cos() / th.cos()
    };
    let c = d.powf(e);
    let g = |th: f64| {
        let vv = v(th);
        if !vv.is_finite() || c * vv > 700.0 {
            0.0
        } else {
            vv * (-c * vv).exp()
        }
    };
    // V decreases from +∞ to 0 on the range; the integrand peaks where cV = 1.
    let (mut lo, mut hi) = (-theta0, PI / 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if c * v(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let peak = 0.5 * (lo + hi);
    let pre = alpha * d.powf(1.0 / (alpha - 1.0)) / (PI * (alpha - 1.0).abs());
    let floor = 1e-16 / pre;
    pre * (simpson_floor(&g, -theta0, peak, 1e-12, floor, 16) + simpson_floor(&g, peak, PI / 2.0, 1e-12, floor, 16))
}

/// S1 density: `X₁ = X₀ + β tan(πα/2)`.
pub fn stable_s1(x: f64, alpha: f64, beta: f64) -> f64 {
    stable_s0(x - beta * (PI * alpha / 2.0).tan(), alpha, beta)
}

/// `∫ e^{-2iπuξ} e^{-(t/√2)|2πξ|^{3/2}(1 + i sgn ξ)} dξ`: a totally skewed 3/2-stable law,
/// with scale `(t/√2)^{2/3}` and its heavy tail at positive `u`.
pub fn fractional_kernel_oracle(t: f64, u: f64) -> f64 {
    let sigma = (t / 2f64.sqrt()).powf(2.0 / 3.0);
    stable_s1(-u / sigma, 1.5, -1.0) / sigma
}

/// Lanczos Γ, g = 7.
pub fn gamma_fn(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Limit volume correlation for `f = h = e^{-πx²}` under
/// `transport·∇ + diffusion·λΔ - relaxation·c`, in closed form.
pub fn gaussian_volume_limit(transport: f64, diffusion: f64, relaxation: f64, t: f64, lambda: f64, c: f64, beta: f64) -> f64 {
    let a = 2.0 * PI + 4.0 * PI * PI * diffusion * lambda * t;
    let s = transport * t;
    (-relaxation * c * t).exp() * (PI / a).sqrt() * (-(PI * s).powi(2) / a).exp() / beta
}

/// Dense `L² × L²` generator of `C = E[v vᵀ]`, assembled from the transport matrix
/// and the noise maps: `C' = AC + CAᵀ + γ Σ_x (F_x C F_x - C) + λ Σ_b (P_b C P_b - C)`.
pub fn pair_generator_dense(l: usize, lambda: f64, gamma: f64) -> Vec<Vec<f64>> {
    let n = l * l;
    let mut g = vec![vec![0.0; n]; n];
    let idx = |x: usize, y: usize| x * l + y;
    let mut a = vec![vec![0.0; l]; l];
    for x in 0..l {
        a[x][(x + 1) % l] += 1.0;
        a[x][(x + l - 1) % l] -= 1.0;
    }
    for x in 0..l {
        for y in 0..l {
            let row = idx(x, y);
            for k in 0..l {
                g[row][idx(k, y)] += a[x][k];
                g[row][idx(x, k)] += a[y][k];
            }
            for s in 0..l {
                let sign = if (x == s) ^ (y == s) { -1.0 } else { 1.0 };
                g[row][row] += gamma * (sign - 1.0);
            }
            for b in 0..l {
                let swap = |i: usize| {
                    if i == b {
                        (b + 1) % l
                    } else if i == (b + 1) % l {
                        b
                    } else {
                        i
                    }
                };
                g[row][idx(swap(x), swap(y))] += lambda;
                g[row][row] -= lambda;
            }
        }
    }
    g
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// `e^{tG}` by scaling and squaring of a degree-20 Taylor polynomial.
pub fn expm(g: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = g.len();
    let norm = g.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let h = t / 2f64.powi(squarings as i32);
    let scaled: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|v| v * h).collect()).collect();
    let mut result: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut term = result.clone();
    for k in 1..=20 {
        term = matmul(&term, &scaled);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// `E[v_z(T)²]` from `v(0) = e_0` by the dense exponential.
pub fn flow_diagonal_oracle(l: usize, lambda: f64, gamma: f64, horizon: f64) -> Vec<f64> {
    let e = expm(&pair_generator_dense(l, lambda, gamma), horizon);
    (0..l).map(|z| e[z * l + z][0]).collect()
}

/// `m(T)` for `m' = m(x+1) - m(x-1) - 2γm + λΔm`, `m(0) = e_0`, on a ring of `L` sites.
pub fn first_moment_oracle(l: usize, lambda: f64, gamma: f64, horizon: f64) -> Vec<f64> {
    let mut g = vec![vec![0.0; l]; l];
    for x in 0..l {
        g[x][(x + 1) % l] += 1.0 + lambda;
        g[x][(x + l - 1) % l] += lambda - 1.0;
        g[x][x] -= 2.0 * gamma + 2.0 * lambda;
    }
    let e = expm(&g, horizon);
    (0..l).map(|x| e[x][0]).collect()
}
