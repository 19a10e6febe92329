//! CDF error of the estimator versus the empirical CDF error.
//!
//! For a truth of the form `f₀(x) = e^{γx} h(x)` with `h` concave on the data
//! hull, the estimator's Kolmogorov error is at most `ρ(|κ|)` times that of
//! the empirical distribution function, where `κ = γ (max - min)` over the
//! sample. [`marshall_check`] evaluates both sides exactly for one sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Density, NamedDensity};
use crate::divergence::ks_empirical;
use crate::error::{Error, Result};
use crate::mle::{fit_mle, FitOptions, MleFit, WeightedSample};
use crate::rng::{rep_rng, rep_seed};
use crate::special::rho;

/// Slack on the inequality, absorbing solver residuals.
pub const MARSHALL_SLACK: f64 = 1e-9;
const CONCAVITY_GRID: usize = 1000;
const CONCAVITY_TOL: f64 = 1e-9;

/// A density `e^{γx} h(x)` with `h` concave on its support.
#[derive(Debug, Clone, PartialEq)]
pub struct FStarDensity {
    pub density: NamedDensity,
    pub gamma: f64,
}

impl FStarDensity {
    pub fn new(density: NamedDensity) -> Result<Self> {
        let gamma = density
            .fstar_gamma()
            .ok_or_else(|| Error::NotFStar(format!("{density} has no tilt/concave decomposition")))?;
        Ok(FStarDensity { density, gamma })
    }

    /// The concave factor `h(x) = f(x) e^{-γx}`.
    pub fn h(&self, x: f64) -> f64 {
        (self.density.log_pdf(x) - self.gamma * x).exp()
    }

    /// Checks concavity of `h` on `[lo, hi]` through second differences on a
    /// uniform grid, with a relative tolerance.
    pub fn check_concave_on(&self, lo: f64, hi: f64) -> Result<()> {
        if !(hi > lo) {
            return Ok(());
        }
        let step = (hi - lo) / CONCAVITY_GRID as f64;
        let vals: Vec<f64> = (0..=CONCAVITY_GRID)
            .map(|i| self.h(if i == CONCAVITY_GRID { hi } else { lo + step * i as f64 }))
            .collect();
        let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
        for (i, w) in vals.windows(3).enumerate() {
            if w[0] - 2.0 * w[1] + w[2] > CONCAVITY_TOL * scale {
                return Err(Error::NotFStar(format!(
                    "{} is not concave near {}",
                    self.density,
                    lo + step * (i + 1) as f64
                )));
            }
        }
        Ok(())
    }
}

/// The built-in tilted-concave truths: uniform, truncated exponential,
/// triangular and a Gamma with shape in `[1, 2]`.
pub fn fstar_members() -> Vec<FStarDensity> {
    ["uniform:0,1", "truncexp:1,0,2", "triangular:0,0.25,1", "gamma:1.5,1"]
        .iter()
        .map(|s| FStarDensity::new(s.parse().expect("catalog entries parse")).expect("catalog entries are tilted-concave"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarshallReport {
    /// `γ (max - min)` over the raw sample.
    pub kappa: f64,
    pub rho_kappa: f64,
    /// `sup |F̂ - F₀|`.
    pub lhs: f64,
    /// `sup |F_n - F₀|`.
    pub rhs_base: f64,
    /// `lhs / (rho_kappa rhs_base)`.
    pub ratio: f64,
    /// `lhs / rhs_base`, reported for inspection only.
    pub unscaled_ratio: f64,
    pub holds: bool,
    /// `h` vanishes somewhere on the data hull.
    pub h_touches_zero: bool,
    /// Largest characterization residual of the fit, raw-count band included.
    pub fit_residual: f64,
}

/// Fits the estimator to `sample` and compares both CDF errors against `f0`.
pub fn marshall_check(sample: &WeightedSample, f0: &FStarDensity, opts: &FitOptions) -> Result<MarshallReport> {
    let (lo, hi) = (sample.min(), sample.max());
    f0.check_concave_on(lo, hi)?;
    let fit = fit_mle(sample, opts)?;
    Ok(report(&fit, sample, f0))
}

fn report(fit: &MleFit, sample: &WeightedSample, f0: &FStarDensity) -> MarshallReport {
    let (lo, hi) = (sample.min(), sample.max());
    let kappa = f0.gamma * (hi - lo);
    let rho_kappa = rho(kappa.abs());
    let lhs = fit_cdf_error(fit, f0);
    let rhs_base = ks_empirical(sample, &f0.density).value;
    let ratio_of = |num: f64, den: f64| if den > 0.0 { num / den } else if num == 0.0 { 0.0 } else { f64::INFINITY };
    let h_touches_zero = f0.h(lo) <= 0.0 || f0.h(hi) <= 0.0 || {
        let step = (hi - lo) / CONCAVITY_GRID as f64;
        (1..CONCAVITY_GRID).any(|i| f0.h(lo + step * i as f64) <= 0.0)
    };
    MarshallReport {
        kappa,
        rho_kappa,
        lhs,
        rhs_base,
        ratio: ratio_of(lhs, rho_kappa * rhs_base),
        unscaled_ratio: ratio_of(lhs, rhs_base),
        holds: lhs <= rho_kappa * rhs_base + MARSHALL_SLACK,
        h_touches_zero,
        fit_residual: fit.residuals.max().max(fit.residuals.knot_band_raw),
    }
}

/// `sup |F̂ - F₀|`. Outside the fit's support the gap is largest at the
/// hull ends. Inside a fit segment `F̂ - F₀` has critical points where
/// `f̂ = f₀`, i.e. zeros of the convex function `f̂(x) e^{-γx} - h(x)`: at
/// most two, bracketed around its minimum.
fn fit_cdf_error(fit: &MleFit, f0: &FStarDensity) -> f64 {
    let d = &f0.density;
    let est = &fit.density;
    let knots = est.finite_knots();
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    let gap = |x: f64| -> f64 {
        let fc = est.cdf(x);
        if fc > 0.5 {
            (d.sf(x) - est.sf(x)).abs()
        } else {
            (fc - d.cdf(x)).abs()
        }
    };
    let mut sup = d.cdf(lo).max(d.sf(hi));
    for &k in knots {
        sup = sup.max(gap(k));
    }
    for seg in est.segments() {
        let (a, b) = (seg.lo, seg.hi);
        let g = |x: f64| (seg.log_pdf(x) - f0.gamma * x).exp() - f0.h(x);
        let (m, gm) = convex_min(&g, a, b);
        if gm < 0.0 {
            if g(a) > 0.0 {
                sup = sup.max(gap(bisect(&g, a, m)));
            }
            if g(b) > 0.0 {
                sup = sup.max(gap(bisect(&g, m, b)));
            }
        }
        sup = sup.max(gap(m));
    }
    sup
}

fn convex_min<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64) -> (f64, f64) {
    for _ in 0..200 {
        if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if g(m1) <= g(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let m = 0.5 * (a + b);
    (m, g(m))
}

/// Sign change of `g` between `a` and `b`.
fn bisect<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64) -> f64 {
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (g(m) > 0.0) == (ga > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// One report per replication, with the replication seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarshallRun {
    pub seed: u64,
    pub report: MarshallReport,
}

/// Runs [`marshall_check`] on `reps` seeded samples of size `n` drawn from
/// `f0`. Replication `r` uses seed `seed + r`. Runs on the current rayon pool;
/// the output does not depend on the number of threads.
pub fn marshall_runs(f0: &FStarDensity, n: usize, reps: usize, seed: u64, opts: &FitOptions) -> Result<Vec<MarshallRun>> {
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let x = f0.density.sample(&mut rep_rng(seed, n, rep), n);
            let sample = WeightedSample::from_observations(&x)?;
            Ok(MarshallRun { seed: rep_seed(seed, rep as u64), report: marshall_check(&sample, f0, opts)? })
        })
        .collect()
}

/// Violation counts over a set of runs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MarshallSummary {
    pub runs: usize,
    pub violations: usize,
    pub max_ratio: f64,
    pub h_touches_zero: usize,
}

impl MarshallSummary {
    pub fn record(mut self, r: &MarshallReport) -> Self {
        self.runs += 1;
        self.violations += (!r.holds) as usize;
        self.max_ratio = self.max_ratio.max(r.ratio);
        self.h_touches_zero += r.h_touches_zero as usize;
        self
    }

    pub fn merge(self, other: Self) -> Self {
        MarshallSummary {
            runs: self.runs + other.runs,
            violations: self.violations + other.violations,
            max_ratio: self.max_ratio.max(other.max_ratio),
            h_touches_zero: self.h_touches_zero + other.h_touches_zero,
        }
    }
}
