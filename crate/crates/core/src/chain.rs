//! Exact event-driven simulation of the chain on a ring of `L` sites.
//!
//! Free-mode convention: the forward FFT coefficient `F_k = Σ_x ω_x e^{-2iπkx/L}`
//! evolves as `F_k ↦ e^{+2i sin(2πk/L) dt} F_k`. In the crate-wide convention
//! `ω̂(θ) = Σ_x ω_x e^{2iπθx}` (so `ω̂(k/L) = F_{-k}`) this is `e^{-2i sin(2πθ) dt}`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::sum::pairwise_rows;

/// Gaps shorter than this are below clock resolution; adjacent events are merged.
pub const MERGE_DT: f64 = 1e-14;
/// Default cap on events per trajectory.
pub const DEFAULT_MAX_EVENTS: u64 = 2_000_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub omega: Vec<f64>,
    pub time: f64,
    pub energy0: f64,
}

impl ChainState {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.len() < 4 {
            return Err(Error::param("L", format!("ring needs at least 4 sites, got {}", omega.len())));
        }
        let energy0 = energy(&omega);
        Ok(ChainState { omega, time: 0.0, energy0 })
    }

    /// Unit mass at site 0: the flow-column initial vector.
    pub fn unit(l: usize) -> Result<Self> {
        let mut omega = vec![0.0; l];
        if l > 0 {
            omega[0] = 1.0;
        }
        ChainState::new(omega)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.omega)
    }

    pub fn volume(&self) -> f64 {
        crate::sum::pairwise(&self.omega)
    }

    /// `|E(t)/E(0) - 1|`.
    pub fn energy_drift(&self) -> f64 {
        if self.energy0 == 0.0 {
            return self.energy().abs();
        }
        (self.energy() / self.energy0 - 1.0).abs()
    }
}

fn energy(omega: &[f64]) -> f64 {
    let sq: Vec<f64> = omega.iter().map(|w| w * w).collect();
    crate::sum::pairwise(&sq)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Flip,
    Exchange,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvent {
    pub time: f64,
    pub kind: NoiseKind,
    pub site: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseEventLog {
    pub events: Vec<NoiseEvent>,
}

impl NoiseEventLog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Independent centered Gaussians of variance `1/β`.
pub fn sample_gibbs(params: &ModelParams, l: usize, seed: u64) -> Result<ChainState> {
    if l < 4 {
        return Err(Error::param("L", format!("ring needs at least 4 sites, got {l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = params.beta.recip().sqrt();
    let omega = (0..l)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    ChainState::new(omega)
}

/// Exact propagator of `dω_x = (ω_{x+1} - ω_{x-1}) dt` on a ring; plans are reused.
pub struct FreeEvolver {
    l: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    freq: Vec<f64>,
}

impl FreeEvolver {
    pub fn new(l: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(l);
        let inverse = planner.plan_fft_inverse(l);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let freq = (0..l).map(|k| 2.0 * (2.0 * PI * k as f64 / l as f64).sin()).collect();
        FreeEvolver {
            l,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); l],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            freq,
        }
    }

    pub fn evolve(&mut self, omega: &mut [f64], dt: f64) {
        assert_eq!(omega.len(), self.l, "ring size mismatch");
        if dt == 0.0 {
            return;
        }
        for (b, &w) in self.buf.iter_mut().zip(omega.iter()) {
            *b = Complex64::new(w, 0.0);
        }
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (b, &w) in self.buf.iter_mut().zip(&self.freq) {
            *b *= Complex64::from_polar(1.0, w * dt);
        }
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        let inv_l = 1.0 / self.l as f64;
        for (w, b) in omega.iter_mut().zip(&self.buf) {
            *w = b.re * inv_l;
        }
    }
}

pub fn evolve_free(state: &ChainState, dt: f64) -> Result<ChainState> {
    if !(dt >= 0.0) {
        return Err(Error::param("dt", "must be >= 0"));
    }
    let mut next = state.clone();
    FreeEvolver::new(state.len()).evolve(&mut next.omega, dt);
    next.time += dt;
    Ok(next)
}

pub fn apply_flip(state: &mut ChainState, x: usize) -> Result<()> {
    if x >= state.len() {
        return Err(Error::param("site", format!("{x} outside ring of {}", state.len())));
    }
    state.omega[x] = -state.omega[x];
    Ok(())
}

/// Swap `ω_x` and `ω_{x+1 mod L}`.
pub fn apply_exchange(state: &mut ChainState, x: usize) -> Result<()> {
    let l = state.len();
    if x >= l {
        return Err(Error::param("site", format!("{x} outside ring of {l}")));
    }
    state.omega.swap(x, (x + 1) % l);
    Ok(())
}

/// Runs the dynamics for `horizon` with the given stream; returns the number of events.
///
/// Waiting times are exponential with rate `R = (γ_n + λ) L`; each event is a flip at a
/// uniform site with probability `γ_n/(γ_n + λ)`, otherwise an exchange at a uniform bond.
fn run_events<G: Rng>(
    state: &mut ChainState,
    params: &ModelParams,
    horizon: f64,
    rng: &mut G,
    evolver: &mut FreeEvolver,
    max_events: u64,
    mut log: Option<&mut NoiseEventLog>,
) -> Result<u64> {
    let l = state.len();
    let gamma = params.gamma_n();
    let rate = (gamma + params.lambda) * l as f64;
    let t_end = state.time + horizon;
    if rate <= 0.0 {
        evolver.evolve(&mut state.omega, horizon);
        state.time = t_end;
        return Ok(0);
    }
    let wait = Exp::new(rate).map_err(|e| Error::param("rate", e.to_string()))?;
    let p_flip = gamma / (gamma + params.lambda);
    let mut count = 0u64;
    let mut pending = 0.0;
    let mut clock = state.time;
    loop {
        let dt: f64 = wait.sample(rng);
        if clock + dt >= t_end {
            break;
        }
        if count >= max_events {
            evolver.evolve(&mut state.omega, pending);
            state.time = clock;
            return Err(Error::Budget {
                budget: max_events,
                time: clock,
                log: Box::new(log.map(|l| l.clone()).unwrap_or_default()),
            });
        }
        clock += dt;
        pending += dt;
        if pending >= MERGE_DT {
            evolver.evolve(&mut state.omega, pending);
            pending = 0.0;
        }
        let flip = rng.random::<f64>() < p_flip;
        let site = rng.random_range(0..l);
        if flip {
            state.omega[site] = -state.omega[site];
        } else {
            state.omega.swap(site, (site + 1) % l);
        }
        if let Some(log) = log.as_deref_mut() {
            log.events.push(NoiseEvent {
                time: clock,
                kind: if flip { NoiseKind::Flip } else { NoiseKind::Exchange },
                site,
            });
        }
        count += 1;
    }
    evolver.evolve(&mut state.omega, pending + (t_end - clock));
    state.time = t_end;
    Ok(count)
}

pub fn simulate(
    state: &ChainState,
    params: &ModelParams,
    horizon: f64,
    seed: u64,
    max_events: u64,
) -> Result<(ChainState, NoiseEventLog)> {
    if !(horizon >= 0.0) {
        return Err(Error::param("horizon", "must be >= 0"));
    }
    let mut next = state.clone();
    let mut log = NoiseEventLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evolver = FreeEvolver::new(state.len());
    run_events(&mut next, params, horizon, &mut rng, &mut evolver, max_events, Some(&mut log))?;
    Ok((next, log))
}

/// Per-replica RNG: one ChaCha stream per replica index under a common seed.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    /// Indexed by ring site `z ∈ [0, L)`; negative offsets wrap.
    pub kernel: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicas: usize,
    /// Share of `Σ|kernel|` in the outer 10% of the ring.
    pub outer_mass_fraction: f64,
    pub finite_size_warning: bool,
}

/// Finite-size gate: outer-10% mass must stay below this share of the total.
pub const FINITE_SIZE_GATE: f64 = 1e-6;

pub fn outer_mass_fraction(kernel: &[f64]) -> f64 {
    let l = kernel.len();
    let total: f64 = kernel.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let edge = (l as f64 * 0.4).floor() as usize;
    let outer: f64 = kernel
        .iter()
        .enumerate()
        .filter(|(z, _)| {
            let d = (*z).min(l - *z);
            d > edge
        })
        .map(|(_, v)| v.abs())
        .sum();
    outer / total
}

fn flow_estimate<F>(
    params: &ModelParams,
    t: f64,
    replicas: usize,
    l: usize,
    seed: u64,
    max_events: u64,
    observe: F,
) -> Result<CorrelationEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    if replicas < 2 {
        return Err(Error::param("replicas", "need at least 2"));
    }
    let horizon = params.horizon(t);
    let samples: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut state = ChainState::unit(l)?;
            let mut rng = replica_rng(seed, r as u64);
            let mut evolver = FreeEvolver::new(l);
            run_events(&mut state, params, horizon, &mut rng, &mut evolver, max_events, None)?;
            Ok(state.omega.iter().map(|&v| observe(v)).collect())
        })
        .collect::<Result<_>>()?;
    let sum = pairwise_rows(&samples);
    let squares: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().map(|v| v * v).collect()).collect();
    let sum_sq = pairwise_rows(&squares);
    let rf = replicas as f64;
    let kernel: Vec<f64> = sum.iter().map(|s| s / rf).collect();
    let stderr = kernel
        .iter()
        .zip(&sum_sq)
        .map(|(m, s2)| ((s2 - rf * m * m).max(0.0) / (rf - 1.0) / rf).sqrt())
        .collect();
    let outer = outer_mass_fraction(&kernel);
    Ok(CorrelationEstimate {
        kernel,
        stderr,
        replicas,
        outer_mass_fraction: outer,
        finite_size_warning: outer > FINITE_SIZE_GATE,
    })
}

/// `S(z) ≈ 2β^{-2} E[v_z(t n^a)²]` with `v(0) = e_0`.
///
/// The dynamics is a random orthogonal linear flow `ω(t) = M(t) ω(0)`, so under the
/// Gibbs measure `⟨ω_z²(t); ω_0²(0)⟩ = 2β^{-2} E[M_{z0}²]` and `M e_0` is simulated directly.
pub fn estimate_energy_correlation(
    params: &ModelParams,
    t: f64,
    replicas: usize,
    l: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    estimate_energy_correlation_with_budget(params, t, replicas, l, seed, DEFAULT_MAX_EVENTS)
}

pub fn estimate_energy_correlation_with_budget(
    params: &ModelParams,
    t: f64,
    replicas: usize,
    l: usize,
    seed: u64,
    max_events: u64,
) -> Result<CorrelationEstimate> {
    let scale = 2.0 / (params.beta * params.beta);
    flow_estimate(params, t, replicas, l, seed, max_events, move |v| scale * v * v)
}

/// `V(z) ≈ β^{-1} E[v_z(t n^a)]` with `v(0) = e_0`.
pub fn estimate_volume_correlation(
    params: &ModelParams,
    t: f64,
    replicas: usize,
    l: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    estimate_volume_correlation_with_budget(params, t, replicas, l, seed, DEFAULT_MAX_EVENTS)
}

pub fn estimate_volume_correlation_with_budget(
    params: &ModelParams,
    t: f64,
    replicas: usize,
    l: usize,
    seed: u64,
    max_events: u64,
) -> Result<CorrelationEstimate> {
    let scale = params.beta.recip();
    flow_estimate(params, t, replicas, l, seed, max_events, move |v| scale * v)
}

/// Flow second moments `E[v_x v_y]` (row-major `L × L`) with standard errors.
pub fn estimate_pair_moments(
    params: &ModelParams,
    horizon: f64,
    replicas: usize,
    l: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if replicas < 2 {
        return Err(Error::param("replicas", "need at least 2"));
    }
    let samples: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut state = ChainState::unit(l)?;
            let mut rng = replica_rng(seed, r as u64);
            let mut evolver = FreeEvolver::new(l);
            run_events(&mut state, params, horizon, &mut rng, &mut evolver, DEFAULT_MAX_EVENTS, None)?;
            let v = &state.omega;
            Ok((0..l * l).map(|i| v[i / l] * v[i % l]).collect())
        })
        .collect::<Result<_>>()?;
    let rf = replicas as f64;
    let mean: Vec<f64> = pairwise_rows(&samples).into_iter().map(|s| s / rf).collect();
    let squares: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().map(|v| v * v).collect()).collect();
    let sum_sq = pairwise_rows(&squares);
    let stderr = mean
        .iter()
        .zip(&sum_sq)
        .map(|(m, s2)| ((s2 - rf * m * m).max(0.0) / (rf - 1.0) / rf).sqrt())
        .collect();
    Ok((mean, stderr))
}

/// Brute-force `⟨ω_z²(T)(ω_0²(0) - β^{-1})⟩` from Gibbs initial data; the oracle for the flow identity.
pub fn gibbs_energy_correlation(
    params: &ModelParams,
    horizon: f64,
    replicas: usize,
    l: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if replicas < 2 {
        return Err(Error::param("replicas", "need at least 2"));
    }
    let inv_beta = params.beta.recip();
    let samples: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = replica_rng(seed, r as u64);
            let sd = inv_beta.sqrt();
            let omega: Vec<f64> = (0..l)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sd * z
                })
                .collect();
            let w0 = omega[0] * omega[0] - inv_beta;
            let mut state = ChainState::new(omega)?;
            let mut evolver = FreeEvolver::new(l);
            run_events(&mut state, params, horizon, &mut rng, &mut evolver, DEFAULT_MAX_EVENTS, None)?;
            Ok(state.omega.iter().map(|v| v * v * w0).collect())
        })
        .collect::<Result<_>>()?;
    let rf = replicas as f64;
    let mean: Vec<f64> = pairwise_rows(&samples).into_iter().map(|s| s / rf).collect();
    let squares: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().map(|v| v * v).collect()).collect();
    let sum_sq = pairwise_rows(&squares);
    let stderr = mean
        .iter()
        .zip(&sum_sq)
        .map(|(m, s2)| ((s2 - rf * m * m).max(0.0) / (rf - 1.0) / rf).sqrt())
        .collect();
    Ok((mean, stderr))
}
