use logconcave::experiments::{fit_rate, interval_masses, mc_risk, oracle_rhs, tv_bound_curve};
use logconcave::marshall::{fstar_members, marshall_runs};
use logconcave::{Density, DivergenceKind, ExpSegmentSpec, FitOptions, KAffineSpec, NamedDensity};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn risk_tables_do_not_depend_on_thread_count() {
    let truth: NamedDensity = "laplace:0,1".parse().unwrap();
    let run = || mc_risk(&truth, "laplace:0,1", DivergenceKind::DxSq, &[30, 60, 120], 16, 42, &FitOptions::default()).unwrap();
    let one = in_pool(1, run);
    let four = in_pool(4, run);
    assert_eq!(one, four);
    let rate = fit_rate(&one, false).unwrap();
    assert!(rate.slope < 0.0);
}

#[test]
fn marshall_runs_do_not_depend_on_thread_count() {
    let f0 = &fstar_members()[1];
    let one = in_pool(1, || marshall_runs(f0, 25, 12, 3, &FitOptions::default()).unwrap());
    let three = in_pool(3, || marshall_runs(f0, 25, 12, 3, &FitOptions::default()).unwrap());
    assert_eq!(one, three);
    assert_eq!(one[5].seed, 8);
    assert!(one.iter().all(|r| r.report.holds));
}

#[test]
fn risk_decreases_with_n() {
    let truth: NamedDensity = "gaussian:0,1".parse().unwrap();
    let t = mc_risk(&truth, "gaussian:0,1", DivergenceKind::HellingerSq, &[50, 800], 60, 1, &FitOptions::default()).unwrap();
    let (a, b) = (t.rows[0], t.rows[1]);
    assert!(b.mean + 3.0 * b.stderr < a.mean - 3.0 * a.stderr);
}

#[test]
fn tilted_concave_bound_is_tighter() {
    let spec = ExpSegmentSpec::new(-1.0, 0.0, 2.0).unwrap();
    let truth: NamedDensity = "triangular:0,0.25,1".parse().unwrap();
    let curve = tv_bound_curve(&spec, &truth, true, &[5, 50, 500, 5000]).unwrap();
    for p in &curve.points {
        assert!(p.tv > 0.0 && p.c_n >= 2.0);
        assert!(p.fstar_bound.unwrap() <= p.bound);
        assert!(p.bound >= 0.0);
    }
}

#[test]
fn oracle_term_vanishes_for_k_affine_truth() {
    let lap: NamedDensity = "laplace:0,1".parse().unwrap();
    let kl = logconcave::divergence::kl_sq(&lap, &lap).value;
    assert_eq!(kl, 0.0);
    let v = oracle_rhs(2, 1000.0, kl).unwrap();
    assert!((v - 2.0 / 1000.0 * 1000f64.ln().powf(1.25)).abs() < 1e-15);
    let spec = KAffineSpec::from_density(&lap.piecewise().unwrap()).unwrap();
    let p = interval_masses(&lap, &spec);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert!((lap.cdf(0.0) - p[0]).abs() < 1e-15);
}
