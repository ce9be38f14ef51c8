mod common;

use evanescent::chain::{
    apply_exchange, apply_flip, estimate_energy_correlation, estimate_energy_correlation_with_budget,
    estimate_volume_correlation, evolve_free, gibbs_energy_correlation, outer_mass_fraction, sample_gibbs, simulate,
    ChainState, FreeEvolver, NoiseKind,
};
use evanescent::{Error, ModelParams};
use proptest::prelude::*;

/// `n = 1, a = 1`: macroscopic and microscopic time coincide.
fn unit_scale(lambda: f64, c: f64, beta: f64) -> ModelParams {
    ModelParams::new(lambda, c, 0.0, 1, beta, 1.0).unwrap()
}

fn transport_matrix(l: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; l]; l];
    for x in 0..l {
        a[x][(x + 1) % l] += 1.0;
        a[x][(x + l - 1) % l] -= 1.0;
    }
    a
}

#[test]
fn free_evolution_matches_matrix_exponential() {
    let l = 12;
    let omega: Vec<f64> = (0..l).map(|x| ((x * 7 + 3) % 5) as f64 - 2.0).collect();
    let s = ChainState::new(omega.clone()).unwrap();
    let t = 2.7;
    let e = common::expm(&transport_matrix(l), t);
    let next = evolve_free(&s, t).unwrap();
    for x in 0..l {
        let exact: f64 = (0..l).map(|y| e[x][y] * omega[y]).sum();
        assert!((next.omega[x] - exact).abs() < 1e-12, "site {x}");
    }
    assert_eq!(next.time, t);
}

#[test]
fn free_evolution_conserves_energy_per_step() {
    let p = unit_scale(1.0, 1.0, 1.0);
    let mut s = sample_gibbs(&p, 1024, 5).unwrap();
    let volume = s.volume();
    let mut ev = FreeEvolver::new(1024);
    let mut prev = s.energy();
    for _ in 0..1000 {
        ev.evolve(&mut s.omega, 0.37);
        let e = s.energy();
        assert!((e / prev - 1.0).abs() < 1e-12);
        prev = e;
    }
    assert!((s.volume() - volume).abs() < 1e-9 * volume.abs().max(1.0));
}

#[test]
fn free_evolution_is_reversible() {
    let p = unit_scale(1.0, 1.0, 1.0);
    let s = sample_gibbs(&p, 64, 9).unwrap();
    let mut w = s.omega.clone();
    let mut ev = FreeEvolver::new(64);
    ev.evolve(&mut w, 5.0);
    ev.evolve(&mut w, -5.0);
    for (a, b) in w.iter().zip(&s.omega) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(evolve_free(&s, -1.0).is_err());
}

#[test]
fn noiseless_run_has_empty_log() {
    let p = unit_scale(0.0, 0.0, 1.0);
    let s = ChainState::unit(16).unwrap();
    let (next, log) = simulate(&s, &p, 3.0, 1, 100).unwrap();
    assert!(log.is_empty());
    let exact = evolve_free(&s, 3.0).unwrap();
    for (a, b) in next.omega.iter().zip(&exact.omega) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn event_log_is_ordered_and_energy_is_kept() {
    let p = unit_scale(1.0, 0.5, 1.0);
    let s = sample_gibbs(&p, 256, 3).unwrap();
    let (next, log) = simulate(&s, &p, 30.0, 11, u64::MAX).unwrap();
    assert!(log.len() > 5_000);
    assert!(log.events.windows(2).all(|w| w[0].time <= w[1].time));
    assert!(log.events.iter().all(|e| e.time > 0.0 && e.time < 30.0 && e.site < 256));
    assert!(next.energy_drift() < 1e-9);
    assert!((next.time - 30.0).abs() < 1e-12);
}

#[test]
fn event_counts_follow_the_rates() {
    let (lambda, c, l, horizon) = (0.7, 0.3, 32, 5.0);
    let p = unit_scale(lambda, c, 1.0);
    let s = ChainState::unit(l).unwrap();
    let runs = 200;
    let mut counts = Vec::new();
    let mut flips = 0usize;
    let mut total = 0usize;
    for seed in 0..runs {
        let (_, log) = simulate(&s, &p, horizon, seed, u64::MAX).unwrap();
        counts.push(log.len() as f64);
        flips += log.events.iter().filter(|e| e.kind == NoiseKind::Flip).count();
        total += log.len();
    }
    let mean = (lambda + c) * l as f64 * horizon;
    let avg = counts.iter().sum::<f64>() / runs as f64;
    // Poisson counts: standard error √(mean / runs).
    assert!((avg - mean).abs() < 4.0 * (mean / runs as f64).sqrt(), "{avg} vs {mean}");
    let share = flips as f64 / total as f64;
    let p_flip = c / (lambda + c);
    assert!((share - p_flip).abs() < 4.0 * (p_flip * (1.0 - p_flip) / total as f64).sqrt());
}

#[test]
fn runs_are_deterministic_per_seed() {
    let p = unit_scale(1.0, 1.0, 2.0);
    let s = sample_gibbs(&p, 64, 1).unwrap();
    let (a, la) = simulate(&s, &p, 4.0, 42, u64::MAX).unwrap();
    let (b, lb) = simulate(&s, &p, 4.0, 42, u64::MAX).unwrap();
    assert_eq!(la, lb);
    assert!(a.omega.iter().zip(&b.omega).all(|(x, y)| x.to_bits() == y.to_bits()));
    let (_, lc) = simulate(&s, &p, 4.0, 43, u64::MAX).unwrap();
    assert_ne!(la, lc);
    let e1 = estimate_energy_correlation(&p, 1.0, 50, 8, 7).unwrap();
    let e2 = estimate_energy_correlation(&p, 1.0, 50, 8, 7).unwrap();
    assert_eq!(e1, e2);
}

#[test]
fn exchange_only_conserves_volume() {
    let p = unit_scale(1.0, 0.0, 1.0);
    let s = sample_gibbs(&p, 64, 2).unwrap();
    let (next, log) = simulate(&s, &p, 10.0, 5, u64::MAX).unwrap();
    assert!(!log.is_empty());
    assert!((next.volume() - s.volume()).abs() < 1e-10);
}

#[test]
fn budget_overrun_returns_partial_log() {
    let p = unit_scale(1.0, 1.0, 1.0);
    let s = ChainState::unit(64).unwrap();
    match simulate(&s, &p, 100.0, 1, 5) {
        Err(Error::Budget { budget, time, log }) => {
            assert_eq!(budget, 5);
            assert_eq!(log.len(), 5);
            assert!(time > 0.0 && time < 100.0);
        }
        other => panic!("expected a budget error, got {other:?}"),
    }
    assert!(matches!(
        estimate_energy_correlation_with_budget(&p, 100.0, 4, 64, 1, 10),
        Err(Error::Budget { .. })
    ));
}

#[test]
fn flow_estimates_match_exact_moments() {
    let (lambda, c, beta, t, l) = (0.8, 0.4, 2.0, 1.3, 6);
    let p = unit_scale(lambda, c, beta);
    let est = estimate_energy_correlation(&p, t, 4000, l, 17).unwrap();
    let exact = common::flow_diagonal_oracle(l, lambda, c, t);
    for z in 0..l {
        let target = 2.0 / (beta * beta) * exact[z];
        assert!((est.kernel[z] - target).abs() < 4.0 * est.stderr[z], "z = {z}: {} vs {target}", est.kernel[z]);
    }
    let vol = estimate_volume_correlation(&p, t, 4000, l, 18).unwrap();
    let m = common::first_moment_oracle(l, lambda, c, t);
    for z in 0..l {
        assert!((vol.kernel[z] - m[z] / beta).abs() < 4.0 * vol.stderr[z]);
    }
}

#[test]
fn flow_identity_matches_gibbs_brute_force() {
    let p = unit_scale(1.0, 0.5, 1.0);
    let (t, l) = (1.0, 8);
    let flow = estimate_energy_correlation(&p, t, 4000, l, 3).unwrap();
    let (gibbs, se) = gibbs_energy_correlation(&p, t, 20000, l, 4).unwrap();
    for z in 0..l {
        let combined = (flow.stderr[z].powi(2) + se[z].powi(2)).sqrt();
        assert!((flow.kernel[z] - gibbs[z]).abs() < 4.0 * combined, "z = {z}");
    }
}

#[test]
fn finite_size_gate() {
    let mut k = vec![0.0; 100];
    k[0] = 1.0;
    k[1] = 0.5;
    assert_eq!(outer_mass_fraction(&k), 0.0);
    k[50] = 1.5;
    assert!((outer_mass_fraction(&k) - 0.5).abs() < 1e-15);
    let p = unit_scale(1.0, 1.0, 1.0);
    let small = estimate_energy_correlation(&p, 5.0, 20, 8, 1).unwrap();
    assert!(small.finite_size_warning);
}

#[test]
fn gibbs_samples_have_inverse_temperature_variance() {
    let p = unit_scale(1.0, 1.0, 4.0);
    let s = sample_gibbs(&p, 40_000, 8).unwrap();
    let var = s.energy() / s.len() as f64;
    // Var of the sample second moment: 2/(β² L).
    assert!((var - 0.25).abs() < 4.0 * (2.0 / 16.0 / 40_000.0f64).sqrt());
    assert!(sample_gibbs(&p, 3, 1).is_err());
}

proptest! {
    #[test]
    fn noise_maps_preserve_energy(omega in prop::collection::vec(-5.0f64..5.0, 4..40), site in 0usize..1000) {
        let mut s = ChainState::new(omega).unwrap();
        let e = s.energy();
        let x = site % s.len();
        apply_flip(&mut s, x).unwrap();
        apply_exchange(&mut s, x).unwrap();
        prop_assert!((s.energy() - e).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn exchange_twice_is_identity(omega in prop::collection::vec(-5.0f64..5.0, 4..40), site in 0usize..1000) {
        let mut s = ChainState::new(omega.clone()).unwrap();
        let x = site % s.len();
        apply_exchange(&mut s, x).unwrap();
        apply_exchange(&mut s, x).unwrap();
        prop_assert_eq!(s.omega, omega);
    }
}
