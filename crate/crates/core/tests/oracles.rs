mod common;

use logconcave::divergence::{dks_n, hellinger_sq, kl_sq, ks, ks_observations, tv};
use logconcave::rng::stream_rng;
use logconcave::{fit_mle, q, rho, Density, FitOptions, NamedDensity, WeightedSample};
use rand::Rng;

fn nd(s: &str) -> NamedDensity {
    s.parse().unwrap()
}

/// `sup |h|` on a uniform grid of `k` points over `[lo, hi]`.
fn grid_sup(h: impl Fn(f64) -> f64, lo: f64, hi: f64, k: usize) -> f64 {
    (0..=k).map(|i| h(lo + (hi - lo) * i as f64 / k as f64)).fold(0.0, f64::max)
}

#[test]
fn weighted_fits_match_direct_search() {
    let mut rng = stream_rng(11, 0);
    for m in [3usize, 4] {
        for _ in 0..10 {
            let mut x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            x.sort_by(f64::total_cmp);
            let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let s = WeightedSample::new(x.clone(), w.clone()).unwrap();
            let fit = fit_mle(&s, &FitOptions::default()).unwrap();
            let oracle = common::brute_force_loglik(&x, &w);
            assert!((fit.objective - oracle).abs() < 1e-6, "{x:?} {w:?}: {} vs {oracle}", fit.objective);
        }
    }
}

#[test]
fn fitted_divergences_match_quadrature() {
    let truth = nd("laplace:0,1");
    let exact_truth = truth.piecewise().unwrap().into_owned();
    for seed in 0..6 {
        let x = truth.sample(&mut stream_rng(seed, 1), 200);
        let fit = fit_mle(&WeightedSample::from_observations(&x).unwrap(), &FitOptions::default()).unwrap();
        let (qt, qh, qk) = common::quad_divergences(&fit.density, &exact_truth);
        assert!((tv(&fit.density, &truth).value - qt).abs() < 1e-8);
        assert!((hellinger_sq(&fit.density, &truth).value - qh).abs() < 1e-8);
        assert!((kl_sq(&fit.density, &truth).value - qk).abs() < 1e-8);
        assert!(kl_sq(&truth, &fit.density).value.is_infinite());
    }
}

#[test]
fn quadrature_fallback_against_smooth_truth() {
    let truth = nd("gaussian:0,1");
    let x = truth.sample(&mut stream_rng(4, 1), 300);
    let fit = fit_mle(&WeightedSample::from_observations(&x).unwrap(), &FitOptions::default()).unwrap();
    let (lo, hi) = fit.density.support();
    let tv_q = 0.5
        * (common::cc(&|t| (fit.density.pdf(t) - truth.pdf(t)).abs(), lo, hi, 1e-12, 0)
            + truth.cdf(lo)
            + truth.sf(hi));
    assert!((tv(&fit.density, &truth).value - tv_q).abs() < 1e-8);
}

#[test]
fn ks_matches_dense_grid() {
    let a = nd("exponential:1");
    let b = nd("gamma:1.5,0.8");
    let exact = ks(&a, &b).value;
    let grid = grid_sup(|t| (a.cdf(t) - b.cdf(t)).abs(), 0.0, 30.0, 400_000);
    assert!(exact >= grid - 1e-12 && exact - grid < 1e-8, "{exact} {grid}");
}

#[test]
fn dks_n_matches_dense_grid() {
    let a = nd("uniform:0,1");
    let b = nd("triangular:0,0.25,1");
    for n in [1usize, 3, 10] {
        let k = n as i32;
        let exact = dks_n(&a, &b, n).unwrap().value;
        let up = grid_sup(|t| (a.cdf(t).powi(k) - b.cdf(t).powi(k)).abs(), 0.0, 1.0, 400_000);
        let down = grid_sup(|t| (a.sf(t).powi(k) - b.sf(t).powi(k)).abs(), 0.0, 1.0, 400_000);
        assert!(exact >= up + down - 1e-12 && exact - (up + down) < 1e-8, "n={n}: {exact} {}", up + down);
    }
}

#[test]
fn dks_three_uniform_pair_closed_form() {
    let a = nd("uniform:0,1");
    let b = nd("uniform:0,2");
    let x = (2f64.sqrt() - 1.0) / (2f64.sqrt() - 0.5);
    let expected = 0.875 + ((1.0 - x / 2.0).powi(3) - (1.0 - x).powi(3));
    assert!((dks_n(&a, &b, 3).unwrap().value - expected).abs() < 1e-12);
}

#[test]
fn empirical_ks_matches_brute_force() {
    let f0 = nd("gaussian:0.3,1.2");
    let x = f0.sample(&mut stream_rng(8, 0), 40);
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let brute = sorted
        .iter()
        .enumerate()
        .map(|(i, &t)| (f0.cdf(t) - i as f64 / n).abs().max((f0.cdf(t) - (i + 1) as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!((ks_observations(&x, &f0).value - brute).abs() < 1e-15);
}

#[test]
fn q_and_rho_reference_values() {
    assert!((q(2.0) - 0.455_678_841_855_605_37).abs() < 1e-14);
    assert!((rho(2.0) - 2.674_301_412_089_240_5).abs() < 1e-12);
    assert!((rho(0.0) - 2.0).abs() < 1e-14);
}

#[test]
fn exponential_pair_reference_values() {
    let e1 = nd("exponential:1");
    let e2 = nd("exponential:2");
    assert!((hellinger_sq(&e1, &e2).value - (2.0 - 4.0 * 2f64.sqrt() / 3.0)).abs() < 1e-14);
    assert!((kl_sq(&e1, &e2).value - (1.0 - 2f64.ln())).abs() < 1e-14);
    assert!((tv(&e1, &e2).value - 0.25).abs() < 1e-14);
}
