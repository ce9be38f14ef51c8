mod common;

use std::f64::consts::PI;

use evanescent::fourier::{
    decay_constant, discrete_ft, discrete_ft_at, discrete_ft_poisson, inverse_discrete_ft, lattice_norm_sq, lattice_support,
    sobolev_gap,
};
use evanescent::{SpectralGrid, TestFunction};
use proptest::prelude::*;

fn hermite_like() -> TestFunction {
    TestFunction::new(0.3, 0.7, vec![1.0, -0.4, 0.25]).unwrap()
}

#[test]
fn continuous_transform_matches_quadrature() {
    let f = hermite_like();
    for xi in [-2.1, -0.5, 0.0, 0.37, 1.6] {
        let re = common::simpson(&|x: f64| f.eval(x) * (2.0 * PI * xi * x).cos(), -8.0, 8.0, 1e-13);
        let im = common::simpson(&|x: f64| f.eval(x) * (2.0 * PI * xi * x).sin(), -8.0, 8.0, 1e-13);
        let v = f.continuous_ft(xi);
        assert!((v.re - re).abs() < 1e-11 && (v.im - im).abs() < 1e-11, "xi = {xi}: {v} vs {re} + {im}i");
    }
}

#[test]
fn gaussian_is_its_own_transform() {
    let g = TestFunction::gaussian();
    for xi in [0.0, 0.5, 1.7] {
        assert!((g.continuous_ft(xi).re - (-PI * xi * xi).exp()).abs() < 1e-15);
    }
}

#[test]
fn three_routes_to_the_lattice_transform_agree() {
    let f = hermite_like();
    for n in [8u64, 64, 300] {
        let grid = SpectralGrid::centered(n);
        let s = discrete_ft(&f, n, &grid).unwrap();
        for j in (0..grid.m).step_by(grid.m / 37) {
            let xi = grid.point(j);
            let direct = discrete_ft_at(&f, n, xi).unwrap();
            let poisson = discrete_ft_poisson(&f, n, xi);
            assert!((s.values[j] - direct).norm() < 1e-12);
            assert!((poisson - direct).norm() < 1e-12);
        }
    }
}

#[test]
fn off_period_grid_uses_direct_sums() {
    let f = hermite_like();
    let grid = SpectralGrid::new(-1.3, 2.9, 17).unwrap();
    let s = discrete_ft(&f, 32, &grid).unwrap();
    for (j, xi) in grid.points().enumerate() {
        assert!((s.values[j] - discrete_ft_poisson(&f, 32, xi)).norm() < 1e-12);
    }
}

#[test]
fn parseval_on_one_period() {
    let f = hermite_like();
    for n in [16u64, 128] {
        let s = discrete_ft(&f, n, &SpectralGrid::centered(n)).unwrap();
        assert!((s.l2_norm_sq() - lattice_norm_sq(&f, n).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn inversion_recovers_samples() {
    let f = hermite_like();
    let n = 32;
    let s = discrete_ft(&f, n, &SpectralGrid::centered(n)).unwrap();
    for x in [-40i64, -3, 0, 9, 25] {
        let inv = inverse_discrete_ft(&s, n, x);
        assert!(!inv.aliased);
        assert!((inv.value.re - f.eval(x as f64 / n as f64)).abs() < 1e-12);
        assert!(inv.value.im.abs() < 1e-12);
    }
    assert!(inverse_discrete_ft(&s, n, 4 * n as i64).aliased);
}

#[test]
fn lattice_transform_converges_to_continuum() {
    let f = hermite_like();
    // Aliasing decays like e^{-π n² w²}: the ladder must stay above roundoff.
    let gaps: Vec<f64> = [1u64, 2, 3].iter().map(|&n| sobolev_gap(&f, n, 2).unwrap()).collect();
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
    assert!(decay_constant(&f, 64, 2).unwrap().is_finite());
    assert!(decay_constant(&f, 64, 0).is_err());
}

#[test]
fn support_covers_the_bump() {
    let f = TestFunction::scaled_gaussian(1.0, 0.1);
    let (lo, hi) = lattice_support(&f, 100).unwrap();
    assert!(lo < 100 && hi > 100);
    assert!(f.eval((lo - 1) as f64 / 100.0).abs() < 1e-14);
}

#[test]
fn invalid_functions_are_rejected() {
    assert!(TestFunction::new(0.0, 0.0, vec![1.0]).is_err());
    assert!(TestFunction::new(0.0, 1.0, vec![f64::NAN]).is_err());
    assert!(SpectralGrid::new(1.0, 0.0, 8).is_err());
    assert!(discrete_ft(&TestFunction::gaussian(), 0, &SpectralGrid::torus(8)).is_err());
    assert_eq!(discrete_ft_at(&TestFunction::zero(), 4, 0.3).unwrap().norm(), 0.0);
}

proptest! {
    #[test]
    fn lattice_transform_is_periodic_and_hermitian(xi in -50.0f64..50.0, n in 4u64..200) {
        let f = hermite_like();
        let a = discrete_ft_poisson(&f, n, xi);
        let b = discrete_ft_poisson(&f, n, xi + n as f64);
        prop_assert!((a - b).norm() < 1e-12);
        prop_assert!((discrete_ft_poisson(&f, n, -xi) - a.conj()).norm() < 1e-12);
    }

    #[test]
    fn continuous_transform_is_linear(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, xi in -3.0f64..3.0) {
        let a = TestFunction::new(0.1, 0.9, vec![c0]).unwrap();
        let b = TestFunction::new(0.1, 0.9, vec![0.0, c1]).unwrap();
        let sum = TestFunction::new(0.1, 0.9, vec![c0, c1]).unwrap();
        prop_assert!((sum.continuous_ft(xi) - a.continuous_ft(xi) - b.continuous_ft(xi)).norm() < 1e-13);
    }
}
