//! Seeded Monte-Carlo risk studies, rate fits and explicit bound curves.
//!
//! Replication `r` at sample size `n` draws from `rep_rng(seed, n, r)`, so
//! tables are bit-identical for any rayon pool size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Density, ExpSegmentSpec, KAffineSpec};
use crate::divergence::{self, DivergenceKind};
use crate::error::{Error, Result};
use crate::mle::{fit_mle, FitOptions, MleFit, WeightedSample};
use crate::rng::rep_rng;
use crate::special::rho;

/// Loss functions available to [`mc_risk`]: every divergence kind, measured
/// from the fit to the truth.
pub type LossKind = DivergenceKind;

/// Largest share of non-converged replications tolerated per sample size.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub n: usize,
    /// Replications that entered the mean.
    pub reps: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Replications dropped because the fit did not certify.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub truth: String,
    pub loss: LossKind,
    pub seed: u64,
    pub rows: Vec<RiskRow>,
}

/// Per-replication outputs of [`simulate`] at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct Replications<T> {
    pub n: usize,
    /// Values in replication order, non-converged replications left out.
    pub values: Vec<T>,
    pub excluded: usize,
}

/// Draws `reps` samples of each size in `n_grid` from `truth`, fits the
/// estimator and maps each fit through `eval`. Non-converged fits are
/// counted and skipped; more than 1% of them is an error.
pub fn simulate<T, F>(
    truth: &dyn Density,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
    opts: &FitOptions,
    eval: F,
) -> Result<Vec<Replications<T>>>
where
    T: Send,
    F: Fn(&WeightedSample, &MleFit) -> Result<T> + Sync,
{
    if reps < 2 {
        return Err(Error::InvalidParameter("reps must be at least 2".into()));
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidParameter(format!("sample size {n} is below 2")));
    }
    let mut out = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let results: Vec<Result<Option<T>>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let x = truth.sample(&mut rep_rng(seed, n, rep), n);
                let sample = WeightedSample::from_observations(&x)?;
                match fit_mle(&sample, opts) {
                    Ok(fit) => eval(&sample, &fit).map(Some),
                    Err(Error::NonConvergence { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut values = Vec::with_capacity(reps);
        let mut excluded = 0;
        for r in results {
            match r? {
                Some(v) => values.push(v),
                None => excluded += 1,
            }
        }
        if excluded as f64 > MAX_EXCLUDED_FRACTION * reps as f64 {
            return Err(Error::TooManyExclusions { n, reps, excluded });
        }
        out.push(Replications { n, values, excluded });
    }
    Ok(out)
}

/// Loss of a fit against `truth`.
pub fn loss(kind: LossKind, fit: &MleFit, sample: &WeightedSample, truth: &dyn Density) -> Result<f64> {
    let v = match kind {
        DivergenceKind::DxSq => divergence::dx_sq(&fit.density, sample, truth)?,
        DivergenceKind::DksN => divergence::dks_n(&fit.density, truth, sample.raw_n())?,
        k => divergence::between(k, &fit.density, truth, None)?,
    };
    Ok(v.value)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (k - 1) as f64 / k as f64).sqrt())
}

/// Monte-Carlo risk of the estimator for `truth` under `loss`. Rows follow
/// `n_grid` sorted ascending.
pub fn mc_risk(
    truth: &dyn Density,
    truth_id: &str,
    loss_kind: LossKind,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<RiskTable> {
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let reps_out = simulate(truth, &grid, reps, seed, opts, |s, f| loss(loss_kind, f, s, truth))?;
    let rows = reps_out
        .into_iter()
        .map(|r| {
            let (mean, stderr) = mean_stderr(&r.values);
            RiskRow { n: r.n, reps: r.values.len(), mean, stderr, excluded: r.excluded }
        })
        .collect();
    Ok(RiskTable { truth: truth_id.to_string(), loss: loss_kind, seed, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// From the regression residuals.
    pub slope_se: f64,
    /// Propagated from the rows' Monte-Carlo standard errors through
    /// `se(log mean) ≈ stderr / mean`.
    pub mc_slope_se: f64,
    /// `log mean - (5/4) log log n` was regressed instead of `log mean`.
    pub log_corrected: bool,
}

/// Least-squares line of `log mean` on `log n`.
pub fn fit_rate(table: &RiskTable, log_correction: bool) -> Result<RateFit> {
    fit_rate_rows(&table.rows, log_correction)
}

pub fn fit_rate_rows(rows: &[RiskRow], log_correction: bool) -> Result<RateFit> {
    if rows.len() < 3 {
        return Err(Error::InvalidParameter("a rate fit needs at least 3 rows".into()));
    }
    if let Some(r) = rows.iter().find(|r| !(r.mean > 0.0)) {
        return Err(Error::InvalidParameter(format!("mean risk {} at n={} is not positive", r.mean, r.n)));
    }
    if log_correction && rows.iter().any(|r| r.n < 3) {
        return Err(Error::InvalidParameter("log correction needs n >= 3".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| {
            let ln_n = (r.n as f64).ln();
            r.mean.ln() - if log_correction { 1.25 * ln_n.ln() } else { 0.0 }
        })
        .collect();
    let k = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / k;
    let ybar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter("rate fit needs at least two distinct n".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_se = (rss / (k - 2.0) / sxx).sqrt();
    let var_mc: f64 = xs
        .iter()
        .zip(rows)
        .map(|(x, r)| {
            let se = if r.stderr.is_finite() { r.stderr / r.mean } else { 0.0 };
            (x - xbar).powi(2) * se * se
        })
        .sum();
    Ok(RateFit { slope, intercept, slope_se, mc_slope_se: var_mc.sqrt() / sxx, log_corrected: log_correction })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub n: usize,
    /// `min(2ρ(|κ*|), 6 log n)`.
    pub c_n: f64,
    pub tv: f64,
    pub dks_n: f64,
    /// `c_n/√n + (1 + c_n) tv + dks_n`.
    pub bound: f64,
    /// `c_n/√n + 3 tv + dks_n`, present when the truth is tilted-concave.
    pub fstar_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub spec: ExpSegmentSpec,
    pub points: Vec<BoundPoint>,
}

/// Explicit expected-TV bound for approximating `f0` by the single-segment
/// exponential `spec`, at each `n` in `n_grid` (all `n >= 5`).
pub fn tv_bound_curve(spec: &ExpSegmentSpec, f0: &dyn Density, f0_tilted_concave: bool, n_grid: &[usize]) -> Result<BoundCurve> {
    if let Some(&n) = n_grid.iter().find(|&&n| n < 5) {
        return Err(Error::InvalidParameter(format!("bound needs n >= 5, got {n}")));
    }
    let approx = spec.density()?;
    let tv = divergence::tv(&approx, f0).value;
    let two_rho = 2.0 * rho(spec.kappa_star().abs());
    let points = n_grid
        .iter()
        .map(|&n| {
            let dks = divergence::dks_n(&approx, f0, n)?.value;
            let c_n = two_rho.min(6.0 * (n as f64).ln());
            let head = c_n / (n as f64).sqrt();
            Ok(BoundPoint {
                n,
                c_n,
                tv,
                dks_n: dks,
                bound: head + (1.0 + c_n) * tv + dks,
                fstar_bound: f0_tilted_concave.then_some(head + 3.0 * tv + dks),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundCurve { spec: *spec, points })
}

/// Unnormalized oracle rate `(k/n) log^{5/4} n + kl_term`. Only its shape
/// in `n` is meaningful.
pub fn oracle_rhs(k: usize, n: f64, kl_term: f64) -> Result<f64> {
    if k < 1 || !(n >= 1.0) {
        return Err(Error::InvalidParameter("k and n must be at least 1".into()));
    }
    if !(kl_term >= 0.0) {
        return Err(Error::InvalidParameter(format!("kl term {kl_term} is negative")));
    }
    Ok(k as f64 / n * n.ln().powf(1.25) + kl_term)
}

/// Mass of `f0` on each piece of `spec`'s partition.
pub fn interval_masses(f0: &dyn Density, spec: &KAffineSpec) -> Vec<f64> {
    spec.pieces()
        .iter()
        .map(|p| {
            let lo = if p.lo == f64::NEG_INFINITY { 0.0 } else { f0.cdf(p.lo) };
            let hi = if p.hi == f64::INFINITY { 1.0 } else { f0.cdf(p.hi) };
            (hi - lo).max(0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::NamedDensity;

    fn rows(f: impl Fn(f64) -> f64) -> Vec<RiskRow> {
        [100, 200, 400, 800, 1600]
            .iter()
            .map(|&n| RiskRow { n, reps: 10, mean: f(n as f64), stderr: 0.0, excluded: 0 })
            .collect()
    }

    #[test]
    fn synthetic_slopes() {
        let r = fit_rate_rows(&rows(|n| 1.0 / n), false).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-12);
        let r = fit_rate_rows(&rows(|n| n.powf(-0.8)), false).unwrap();
        assert!((r.slope + 0.8).abs() < 1e-12);
        let r = fit_rate_rows(&rows(|n| 3.0 / n * n.ln().powf(1.25)), true).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-12);
        assert!((r.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rate_rejections() {
        assert!(fit_rate_rows(&rows(|n| 1.0 / n)[..2], false).is_err());
        assert!(fit_rate_rows(&rows(|_| 0.0), false).is_err());
    }

    #[test]
    fn oracle_shape() {
        let e = std::f64::consts::E;
        assert!((oracle_rhs(1, e, 0.0).unwrap() - 1.0 / e).abs() < 1e-15);
        let a = oracle_rhs(2, 1000.0, 0.0).unwrap();
        let b = oracle_rhs(2, 2000.0, 0.0).unwrap();
        assert!(b < a && b > 0.5 * a);
        assert!(oracle_rhs(0, 10.0, 0.0).is_err());
    }

    #[test]
    fn uniform_bound_curve() {
        let spec = ExpSegmentSpec::new(0.0, 0.0, 1.0).unwrap();
        let u: NamedDensity = "uniform:0,1".parse().unwrap();
        let c = tv_bound_curve(&spec, &u, true, &[5, 100, 400]).unwrap();
        assert!((c.points[1].bound - 0.4).abs() < 1e-12);
        for p in &c.points {
            assert_eq!(p.tv, 0.0);
            assert_eq!(p.dks_n, 0.0);
            assert!((p.bound - 4.0 / (p.n as f64).sqrt()).abs() < 1e-12);
        }
        assert!(tv_bound_curve(&spec, &u, true, &[4]).is_err());
    }

    #[test]
    fn unbounded_kappa_uses_log_branch() {
        let spec = ExpSegmentSpec::new(-1.0, 0.0, f64::INFINITY).unwrap();
        let f0 = spec.density().unwrap();
        let c = tv_bound_curve(&spec, &f0, true, &[100]).unwrap();
        let n = 100f64;
        assert!((c.points[0].bound - 6.0 * n.ln() / n.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn risk_table_reproducible() {
        let u: NamedDensity = "uniform:0,1".parse().unwrap();
        let opts = FitOptions::default();
        let a = mc_risk(&u, "uniform:0,1", DivergenceKind::Tv, &[40, 20], 8, 5, &opts).unwrap();
        let b = mc_risk(&u, "uniform:0,1", DivergenceKind::Tv, &[20, 40], 8, 5, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows[0].n, 20);
        assert!(a.rows.iter().all(|r| r.mean >= 0.0 && r.stderr >= 0.0 && r.reps == 8));
    }

    #[test]
    fn self_truth_has_zero_log_ratio() {
        let g: NamedDensity = "gaussian:0,1".parse().unwrap();
        let reps = simulate(&g, &[50], 4, 1, &FitOptions::default(), |s, f| {
            Ok(divergence::dx_sq(&f.density, s, &f.density)?.value)
        })
        .unwrap();
        assert!(reps[0].values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masses_on_partition() {
        let lap: NamedDensity = "laplace:0,1".parse().unwrap();
        let spec = KAffineSpec::from_density(&lap.piecewise().unwrap()).unwrap();
        let p = interval_masses(&lap, &spec);
        assert_eq!(p.len(), 2);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }
}
