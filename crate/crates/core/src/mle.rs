//! Log-concave maximum likelihood estimation.
//!
//! The estimator maximizes `Σ w_i φ(x_i) - ∫ e^φ` over concave functions `φ`
//! that are affine between consecutive data points and `-inf` outside the
//! sample range. The solver is an active-set method over knot sets: for a
//! fixed set of knots the problem is a smooth concave maximization in the
//! log-values at the knots, solved by damped Newton with a tridiagonal
//! Hessian. Knots are added where the integrated CDF difference is positive
//! and dropped when the unconstrained Newton solution would lose concavity.
//!
//! All solver work happens on standardized data `(x - x_min) / range`; the fit
//! is mapped back at the end and certified on the original scale.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::density::{Density, PiecewiseLogLinearDensity};
use crate::error::{Error, Result};
use crate::special::{segment_mass, SegmentMoments};

const MAX_NEWTON_STEPS: usize = 100;
/// Below this Newton decrement the full step is taken without a line search;
/// objective differences are then below rounding of the objective itself.
const FULL_STEP_DECREMENT: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Data points with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    points: Vec<f64>,
    weights: Vec<f64>,
    counts: Option<Vec<u64>>,
    raw_n: usize,
    cumulative: Vec<f64>,
}

impl WeightedSample {
    /// Sorts raw observations and merges exact duplicates into weights.
    pub fn from_observations(obs: &[f64]) -> Result<Self> {
        if let Some(bad) = obs.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite observation {bad}")));
        }
        let mut sorted = obs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut points: Vec<f64> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for x in sorted {
            // -0.0 and 0.0 compare equal and are merged
            if points.last() == Some(&x) {
                *counts.last_mut().unwrap() += 1;
            } else {
                points.push(x);
                counts.push(1);
            }
        }
        if points.len() < 2 {
            return Err(Error::InvalidSample("need at least two distinct observations".into()));
        }
        let n = obs.len();
        let weights = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let mut running = 0u64;
        let cumulative = counts
            .iter()
            .map(|&c| {
                running += c;
                running as f64 / n as f64
            })
            .collect();
        Ok(WeightedSample { points, weights, counts: Some(counts), raw_n: n, cumulative })
    }

    /// Distinct sorted points with explicit weights. The raw sample size used
    /// in the `1/n` band of the characterization is taken to be the number of
    /// points.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidSample("points and weights differ in length".into()));
        }
        if points.len() < 2 {
            return Err(Error::InvalidSample("need at least two distinct points".into()));
        }
        if points.iter().any(|x| !x.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSample("points must be finite and strictly increasing".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidSample("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSample(format!("weights sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc / total
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        let raw_n = points.len();
        Ok(WeightedSample { points, weights, counts: None, raw_n, cumulative })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Multiplicities, when the sample was built from raw observations.
    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    /// Number of raw observations.
    pub fn raw_n(&self) -> usize {
        self.raw_n
    }

    /// Number of distinct points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Empirical distribution function at each point (right limits).
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Empirical distribution function.
    pub fn ecdf(&self, x: f64) -> f64 {
        let i = self.points.partition_point(|&p| p <= x);
        if i == 0 {
            0.0
        } else {
            self.cumulative[i - 1]
        }
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Relative tolerance on the Newton decrement of each knot-set subproblem.
    pub objective_tol: f64,
    /// Bound on every characterization residual for a fit to count as converged.
    pub characterization_tol: f64,
    /// Cap on knot additions and removals.
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { objective_tol: 1e-12, characterization_tol: 1e-8, max_iterations: 500 }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.objective_tol > 0.0) || !(self.characterization_tol > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidParameter("fit options must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Residuals of the optimality conditions, in the units of the data.
///
/// With `H(t) = ∫_{-inf}^t (F̂ - F_n)`, an exact maximizer has `H <= 0`
/// everywhere, `H = 0` at every knot, and `F_n(s) - w_s <= F̂(s) <= F_n(s)` at
/// every knot `s`, where `w_s` is the weight of `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max(0, sup_t H(t))`.
    pub integrated_cdf_sup: f64,
    /// `max |H(s)|` over active knots.
    pub integrated_cdf_at_knots: f64,
    /// Largest violation at a knot of `F_n - w_s <= F̂ <= F_n`.
    pub knot_band: f64,
    /// Same band with `w_s` replaced by `1/n` for the raw sample size `n`;
    /// differs from `knot_band` only for tied data.
    pub knot_band_raw: f64,
    /// `|∫ f̂ - 1|`.
    pub mass_error: f64,
}

impl Residuals {
    /// The residuals that certify optimality.
    pub fn max(&self) -> f64 {
        self.integrated_cdf_sup
            .max(self.integrated_cdf_at_knots)
            .max(self.knot_band)
            .max(self.mass_error)
    }
}

/// Output of [`fit_mle`].
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub density: PiecewiseLogLinearDensity,
    /// Data points where `log f̂` may change slope, both extremes included.
    pub active_knots: Vec<f64>,
    /// `Σ w_i log f̂(x_i) - ∫ f̂ + 1`.
    pub objective: f64,
    pub residuals: Residuals,
    /// Knot additions plus removals.
    pub iterations: usize,
    pub converged: bool,
}

/// JSON summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
    pub active_knots: Vec<f64>,
}

impl MleFit {
    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            objective: self.objective,
            residuals: self.residuals,
            iterations: self.iterations,
            converged: self.converged,
            active_knots: self.active_knots.clone(),
        }
    }
}

/// `Σ w_i log f(x_i) - ∫ f + 1`; `-inf` if `f` vanishes at a sample point.
pub fn objective(sample: &WeightedSample, density: &dyn Density) -> f64 {
    let mut ll = 0.0;
    for (&x, &w) in sample.points.iter().zip(&sample.weights) {
        let v = density.log_pdf(x);
        if v == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        ll += w * v;
    }
    ll - density.total_mass() + 1.0
}

/// Residuals of the optimality conditions for `fit` on `sample`.
pub fn check_characterization(fit: &MleFit, sample: &WeightedSample) -> Residuals {
    characterize(&fit.density, &fit.active_knots, sample)
}

fn characterize(density: &PiecewiseLogLinearDensity, knots: &[f64], sample: &WeightedSample) -> Residuals {
    let x = &sample.points;
    let e = &sample.cumulative;
    let inv_n = 1.0 / sample.raw_n as f64;
    let mut h = 0.0f64;
    let mut sup = 0.0f64;
    let mut at_knots = 0.0f64;
    let mut band = 0.0f64;
    let mut band_raw = 0.0f64;
    let mut f_prev = density.cdf(x[0]);
    let mut k = 0;
    for j in 0..x.len() {
        let fj = if j == 0 { f_prev } else { density.cdf(x[j]) };
        if j > 0 {
            let width = x[j] - x[j - 1];
            h += density.excess_cdf_integral(x[j - 1], x[j]) + width * (f_prev - e[j - 1]);
        }
        sup = sup.max(h);
        while k < knots.len() && knots[k] < x[j] {
            k += 1;
        }
        if k < knots.len() && knots[k] == x[j] {
            at_knots = at_knots.max(h.abs());
            let upper = (fj - e[j]).max(0.0);
            band = band.max(upper).max(e[j] - sample.weights[j] - fj);
            band_raw = band_raw.max(upper).max(e[j] - inv_n - fj);
        }
        f_prev = fj;
    }
    Residuals {
        integrated_cdf_sup: sup,
        integrated_cdf_at_knots: at_knots,
        knot_band: band,
        knot_band_raw: band_raw,
        mass_error: (density.total_mass() - 1.0).abs(),
    }
}

/// The log-concave maximum likelihood estimate for `sample`.
///
/// Returns [`Error::NonConvergence`] carrying the last iterate when the
/// residuals stay above `opts.characterization_tol`.
pub fn fit_mle(sample: &WeightedSample, opts: &FitOptions) -> Result<MleFit> {
    opts.validate()?;
    let m = sample.len();
    if m < 2 {
        return Err(Error::InvalidSample("need at least two distinct points".into()));
    }
    let lo = sample.min();
    let range = sample.max() - lo;
    let z: Vec<f64> = sample.points.iter().map(|&x| (x - lo) / range).collect();
    let add_tol = (0.01 * opts.characterization_tol / range.max(1.0)).max(1e-15);
    let mut solver = Solver::new(&z, &sample.weights, opts.objective_tol);
    let band_tol = 0.01 * opts.characterization_tol;
    let (iterations, finished) = solver.run(add_tol, band_tol, opts.max_iterations);

    let knots: Vec<f64> = solver.knots.iter().map(|&i| sample.points[i]).collect();
    let log_range = range.ln();
    let phis: Vec<f64> = solver.theta.iter().map(|t| t - log_range).collect();
    let density = PiecewiseLogLinearDensity::from_finite(knots.clone(), phis, None, None)?;
    let residuals = characterize(&density, &knots, sample);
    let converged = finished && residuals.max() <= opts.characterization_tol;
    let fit = MleFit {
        objective: objective(sample, &density),
        density,
        active_knots: knots,
        residuals,
        iterations,
        converged,
    };
    if converged {
        Ok(fit)
    } else {
        Err(Error::NonConvergence { iterations, residual: residuals.max(), fit: Box::new(fit) })
    }
}

/// Active-set state on standardized data.
struct Solver<'a> {
    z: &'a [f64],
    w: &'a [f64],
    rel_tol: f64,
    /// Indices into `z` of the current knots, increasing, both ends included.
    knots: Vec<usize>,
    /// Log-density at the knots.
    theta: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(z: &'a [f64], w: &'a [f64], rel_tol: f64) -> Self {
        Solver { z, w, rel_tol, knots: vec![0, z.len() - 1], theta: vec![0.0, 0.0] }
    }

    /// Returns the iteration count and whether the add criterion was met.
    ///
    /// One knot enters per round. Starting from the optimum on the old knot
    /// set, the profile likelihood along the new knot's kink has positive
    /// slope at zero, so the kink comes out positive and every round
    /// strictly improves the objective. A knot that is nevertheless blocked
    /// at once (rounding) is skipped until the next successful round.
    fn run(&mut self, add_tol: f64, band_tol: f64, max_iterations: usize) -> (usize, bool) {
        let mut iterations = 0;
        self.newton();
        let mut tabu: Vec<usize> = Vec::new();
        loop {
            let (h, cdf_gap) = self.integrated_cdf_gap();
            let Some(fresh) = self.candidate(&h, &cdf_gap, add_tol, band_tol, &tabu) else {
                return (iterations, true);
            };
            if iterations >= max_iterations {
                return (iterations, false);
            }
            iterations += 1;
            let feasible = (self.knots.clone(), self.theta.clone());
            self.insert_knot(fresh);
            let mut fresh_blocked = false;
            loop {
                let old = self.theta.clone();
                self.newton();
                let new_kinks = self.kinks(&self.theta);
                if new_kinks.iter().all(|&c| c >= 0.0) {
                    break;
                }
                let old_kinks = self.kinks(&old);
                let mut t_star = 1.0f64;
                let mut blocking = 0;
                for (l, (&co, &cn)) in old_kinks.iter().zip(&new_kinks).enumerate() {
                    if cn < 0.0 {
                        // the fresh knot starts on a straight line
                        let co = if self.knots[l + 1] == fresh { 0.0 } else { co.max(0.0) };
                        let t = co / (co - cn);
                        if t < t_star {
                            t_star = t;
                            blocking = l;
                        }
                    }
                }
                let stepped: Vec<f64> =
                    old.iter().zip(&self.theta).map(|(o, n)| o + t_star * (n - o)).collect();
                self.theta = stepped;
                let kinks = self.kinks(&self.theta);
                // kinks[l] belongs to knot l + 1
                let drop: Vec<usize> = kinks
                    .iter()
                    .enumerate()
                    .filter(|&(l, &c)| l == blocking || c <= 0.0)
                    .map(|(l, _)| l + 1)
                    .collect();
                for &pos in drop.iter().rev() {
                    if t_star == 0.0 && self.knots[pos] == fresh {
                        fresh_blocked = true;
                    }
                    self.knots.remove(pos);
                    self.theta.remove(pos);
                }
                iterations += 1;
                if iterations >= max_iterations {
                    (self.knots, self.theta) = feasible;
                    return (iterations, false);
                }
            }
            if fresh_blocked {
                tabu.push(fresh);
            } else {
                tabu.clear();
            }
        }
    }

    /// The non-knot data point to add next.
    ///
    /// This is the point with the largest `H` above `add_tol`. Failing that,
    /// a knot whose CDF leaves the band `[F_n - w, F_n]` by more than
    /// `band_tol` proposes its neighbour on the offending side: `H` rises
    /// there, but possibly by less than rounding when the neighbour is very
    /// close. Ties go to the lowest abscissa.
    fn candidate(&self, h: &[f64], cdf_gap: &[f64], add_tol: f64, band_tol: f64, tabu: &[usize]) -> Option<usize> {
        let mut best: Option<usize> = None;
        for gap in self.knots.windows(2) {
            for j in gap[0] + 1..gap[1] {
                if h[j] > add_tol && !tabu.contains(&j) && best.is_none_or(|b| h[j] > h[b]) {
                    best = Some(j);
                }
            }
        }
        if best.is_some() {
            return best;
        }
        for (pos, &s) in self.knots.iter().enumerate() {
            if cdf_gap[s] > band_tol && pos + 1 < self.knots.len() && self.knots[pos + 1] != s + 1 && !tabu.contains(&(s + 1)) {
                return Some(s + 1);
            }
            if -cdf_gap[s] - self.w[s] > band_tol && pos > 0 && self.knots[pos - 1] != s - 1 && !tabu.contains(&(s - 1)) {
                return Some(s - 1);
            }
        }
        None
    }

    fn insert_knot(&mut self, j: usize) {
        let pos = self.knots.partition_point(|&k| k < j);
        let (a, b) = (self.knots[pos - 1], self.knots[pos]);
        let lam = (self.z[j] - self.z[a]) / (self.z[b] - self.z[a]);
        let v = (1.0 - lam) * self.theta[pos - 1] + lam * self.theta[pos];
        self.knots.insert(pos, j);
        self.theta.insert(pos, v);
    }

    /// Slope decreases at interior knots, `s_{l-1} - s_l`.
    fn kinks(&self, theta: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = (0..self.knots.len() - 1)
            .map(|l| (theta[l + 1] - theta[l]) / (self.z[self.knots[l + 1]] - self.z[self.knots[l]]))
            .collect();
        s.windows(2).map(|p| p[0] - p[1]).collect()
    }

    /// Sample weight carried by each knot under linear interpolation.
    fn knot_weights(&self) -> Vec<f64> {
        let mut wk = vec![0.0; self.knots.len()];
        wk[0] = self.w[self.knots[0]];
        for l in 0..self.knots.len() - 1 {
            let (a, b) = (self.knots[l], self.knots[l + 1]);
            let width = self.z[b] - self.z[a];
            for i in a + 1..b {
                let lam = (self.z[i] - self.z[a]) / width;
                wk[l] += (1.0 - lam) * self.w[i];
                wk[l + 1] += lam * self.w[i];
            }
            wk[l + 1] += self.w[b];
        }
        wk
    }

    fn value(&self, wk: &[f64], theta: &[f64]) -> f64 {
        let mut v: f64 = wk.iter().zip(theta).map(|(w, t)| w * t).sum();
        for l in 0..self.knots.len() - 1 {
            let (za, zb) = (self.z[self.knots[l]], self.z[self.knots[l + 1]]);
            v -= segment_mass(0.0, theta[l], theta[l + 1], za, zb);
        }
        v
    }

    /// Damped Newton on the log-values at the current knots.
    fn newton(&mut self) {
        let wk = self.knot_weights();
        let r = self.knots.len();
        let mut prev_dec = f64::INFINITY;
        let mut current = self.value(&wk, &self.theta);
        for _ in 0..MAX_NEWTON_STEPS {
            let mut g = wk.clone();
            let mut diag = vec![0.0; r];
            let mut off = vec![0.0; r - 1];
            for l in 0..r - 1 {
                let width = self.z[self.knots[l + 1]] - self.z[self.knots[l]];
                let m = SegmentMoments::new(self.theta[l], self.theta[l + 1]);
                g[l] -= width * m.left;
                g[l + 1] -= width * m.right;
                diag[l] += width * m.left_left;
                diag[l + 1] += width * m.right_right;
                off[l] = -width * m.left_right;
            }
            let d = solve_tridiagonal(&diag, &off, &g);
            let dec: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            let stop = self.rel_tol * current.abs().max(1.0);
            if !(dec > 2.0 * stop * stop) {
                break;
            }
            if dec < FULL_STEP_DECREMENT {
                if dec >= prev_dec {
                    break;
                }
                let cand: Vec<f64> = self.theta.iter().zip(&d).map(|(t, s)| t + s).collect();
                let v = self.value(&wk, &cand);
                if !v.is_finite() {
                    break;
                }
                self.theta = cand;
                current = v;
                prev_dec = dec;
                continue;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let cand: Vec<f64> = self.theta.iter().zip(&d).map(|(th, s)| th + t * s).collect();
                let v = self.value(&wk, &cand);
                if v.is_finite() && v >= current + ARMIJO * t * dec {
                    self.theta = cand;
                    current = v;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            prev_dec = dec;
        }
    }

    /// `H(z_j) = ∫_{z_0}^{z_j} (F̂ - F_n)` and `F̂(z_j) - F_n(z_j)` at every
    /// data point.
    fn integrated_cdf_gap(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.z.len();
        let mut phi = vec![0.0; m];
        for l in 0..self.knots.len() - 1 {
            let (a, b) = (self.knots[l], self.knots[l + 1]);
            let width = self.z[b] - self.z[a];
            phi[a] = self.theta[l];
            for i in a + 1..b {
                let lam = (self.z[i] - self.z[a]) / width;
                phi[i] = (1.0 - lam) * self.theta[l] + lam * self.theta[l + 1];
            }
            phi[b] = self.theta[l + 1];
        }
        let mut h = vec![0.0; m];
        let mut gap = vec![0.0; m];
        gap[0] = -self.w[0];
        for j in 0..m - 1 {
            let width = self.z[j + 1] - self.z[j];
            let mom = SegmentMoments::new(phi[j], phi[j + 1]);
            h[j + 1] = h[j] + width * gap[j] + width * width * mom.left;
            gap[j + 1] = gap[j] + width * mom.mass - self.w[j + 1];
        }
        (h, gap)
    }
}

/// Solves `A x = rhs` for symmetric positive definite tridiagonal `A` with
/// diagonal `diag` and off-diagonal `-off`, regularizing if a pivot collapses.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let scale = diag.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let mut reg = 0.0;
    loop {
        let n = diag.len();
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut ok = true;
        let mut prev_c = 0.0;
        let mut prev_y = 0.0;
        for i in 0..n {
            let sub = if i > 0 { -off[i - 1] } else { 0.0 };
            let pivot = diag[i] + reg - sub * prev_c;
            if !(pivot > 1e-14 * scale) {
                ok = false;
                break;
            }
            c[i] = if i + 1 < n { -off[i] / pivot } else { 0.0 };
            y[i] = (rhs[i] - sub * prev_y) / pivot;
            prev_c = c[i];
            prev_y = y[i];
        }
        if ok {
            for i in (0..n.saturating_sub(1)).rev() {
                y[i] -= c[i] * y[i + 1];
            }
            return y;
        }
        if reg > 0.0 {
            reg *= 1e3;
        } else {
            reg = 1e-12 * scale;
        }
    }
}

/// A mixture of log-concave fits on disjoint intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitFit {
    components: Vec<SplitComponent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitComponent {
    pub interval: (f64, f64),
    /// Fraction of the retained observations falling in the interval.
    pub weight: f64,
    pub fit: MleFit,
}

/// Fits each closed interval of `partition` separately and mixes the fits
/// with weights proportional to the interval counts. Observations outside
/// every interval are ignored.
pub fn split_fit(sample: &WeightedSample, partition: &[(f64, f64)], opts: &FitOptions) -> Result<SplitFit> {
    if partition.is_empty() {
        return Err(Error::InvalidParameter("empty partition".into()));
    }
    for (i, &(a, b)) in partition.iter().enumerate() {
        if !(a <= b) {
            return Err(Error::InvalidParameter(format!("interval {i} is empty")));
        }
        if i > 0 && !(partition[i - 1].1 < a) {
            return Err(Error::InvalidParameter("intervals must be disjoint and ordered".into()));
        }
    }
    let mut parts = Vec::with_capacity(partition.len());
    for &(a, b) in partition {
        let lo = sample.points.partition_point(|&x| x < a);
        let hi = sample.points.partition_point(|&x| x <= b);
        if hi - lo < 2 {
            return Err(Error::InvalidSample(format!("interval [{a}, {b}] holds fewer than two distinct points")));
        }
        parts.push((lo, hi));
    }
    let sizes: Vec<f64> = match &sample.counts {
        Some(c) => parts.iter().map(|&(lo, hi)| c[lo..hi].iter().sum::<u64>() as f64).collect(),
        None => parts.iter().map(|&(lo, hi)| sample.weights[lo..hi].iter().sum()).collect(),
    };
    let total: f64 = sizes.iter().sum();
    let mut components = Vec::with_capacity(parts.len());
    for (&(lo, hi), (&size, &interval)) in parts.iter().zip(sizes.iter().zip(partition)) {
        let sub = match &sample.counts {
            Some(c) => {
                let obs: Vec<f64> = (lo..hi)
                    .flat_map(|i| std::iter::repeat_n(sample.points[i], c[i] as usize))
                    .collect();
                WeightedSample::from_observations(&obs)?
            }
            None => {
                let w: Vec<f64> = sample.weights[lo..hi].iter().map(|w| w / size).collect();
                let mut sub = WeightedSample::new(sample.points[lo..hi].to_vec(), normalize(w))?;
                sub.raw_n = hi - lo;
                sub
            }
        };
        components.push(SplitComponent { interval, weight: size / total, fit: fit_mle(&sub, opts)? });
    }
    Ok(SplitFit { components })
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

impl SplitFit {
    pub fn components(&self) -> &[SplitComponent] {
        &self.components
    }

    fn locate(&self, x: f64) -> Option<usize> {
        self.components.iter().position(|c| {
            let (lo, hi) = c.fit.density.support();
            x >= lo && x <= hi
        })
    }
}

impl Density for SplitFit {
    fn log_pdf(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => {
                let c = &self.components[i];
                c.weight.ln() + c.fit.density.log_pdf(x)
            }
            None => f64::NEG_INFINITY,
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in &self.components {
            let (lo, hi) = c.fit.density.support();
            if x >= hi {
                acc += c.weight;
            } else if x > lo {
                acc += c.weight * c.fit.density.cdf(x);
            }
        }
        acc.min(1.0)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        crate::density::check_probability(p)?;
        let mut acc = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            if p < acc + c.weight || i + 1 == self.components.len() {
                let r = ((p - acc) / c.weight).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                return c.fit.density.quantile(r);
            }
            acc += c.weight;
        }
        unreachable!()
    }

    fn support(&self) -> (f64, f64) {
        let first = self.components[0].fit.density.support();
        let last = self.components[self.components.len() - 1].fit.density.support();
        (first.0, last.1)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| c.fit.density.breakpoints()).collect()
    }

    fn piecewise(&self) -> Option<Cow<'_, PiecewiseLogLinearDensity>> {
        if self.components.len() == 1 {
            Some(Cow::Borrowed(&self.components[0].fit.density))
        } else {
            None
        }
    }

    fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.fit.density.total_mass()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(obs: &[f64]) -> MleFit {
        fit_mle(&WeightedSample::from_observations(obs).unwrap(), &FitOptions::default()).unwrap()
    }

    #[test]
    fn two_points_give_uniform() {
        let f = fit(&[0.0, 1.0]);
        assert_eq!(f.active_knots, vec![0.0, 1.0]);
        assert!(f.density.log_values().iter().all(|v| v.abs() < 1e-12));
        assert!(f.objective.abs() < 1e-12);
        assert!(f.residuals.max() < 1e-10);
    }

    #[test]
    fn rejects_degenerate_samples() {
        assert!(WeightedSample::from_observations(&[1.0, 1.0, 1.0]).is_err());
        assert!(WeightedSample::from_observations(&[1.0, f64::NAN]).is_err());
        assert!(WeightedSample::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(WeightedSample::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn duplicates_merge_into_weights() {
        let s = WeightedSample::from_observations(&[2.0, 0.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.points(), &[0.0, 1.0, 2.0]);
        assert_eq!(s.weights(), &[0.25, 0.25, 0.5]);
        assert_eq!(s.raw_n(), 4);
        assert_eq!(s.cumulative(), &[0.25, 0.5, 1.0]);
    }

    #[test]
    fn tridiagonal_solver() {
        // [[2,-1,0],[-1,2,-1],[0,-1,2]] x = [1,0,1] -> x = [1,1,1]
        let x = solve_tridiagonal(&[2.0, 2.0, 2.0], &[1.0, 1.0], &[1.0, 0.0, 1.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn skewed_sample_certifies() {
        let obs: Vec<f64> = (1..=40).map(|i| (i as f64 / 41.0).powi(3)).collect();
        let f = fit(&obs);
        assert!(f.residuals.max() < 1e-8);
        assert!(f.active_knots.len() >= 2);
        assert!((f.density.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn split_fit_single_interval_matches_full_fit() {
        let obs = [0.1, 0.4, 0.45, 0.9, 1.3, 2.0];
        let s = WeightedSample::from_observations(&obs).unwrap();
        let full = fit_mle(&s, &FitOptions::default()).unwrap();
        let split = split_fit(&s, &[(0.0, 5.0)], &FitOptions::default()).unwrap();
        assert_eq!(split.components()[0].fit.density, full.density);
        assert_eq!(split.components()[0].weight, 1.0);
    }
}
