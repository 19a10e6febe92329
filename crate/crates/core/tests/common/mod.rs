//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use logconcave::{Density, ExpSegmentSpec, PiecewiseLogLinearDensity};
use rand::Rng;

/// Adaptive Clenshaw–Curtis on a finite interval.
pub fn cc(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::clenshaw_curtis::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth >= 30 {
        return out.integral;
    }
    let m = 0.5 * (a + b);
    cc(f, a, m, 0.5 * tol, depth + 1) + cc(f, m, b, 0.5 * tol, depth + 1)
}

/// Breakpoints of a finite window outside which both densities are below
/// e^-80. Tails get dyadic panels so that no single panel is much wider than
/// the scale of the mass near its inner end.
fn window(f: &PiecewiseLogLinearDensity, g: &PiecewiseLogLinearDensity) -> Vec<f64> {
    let mut breaks: Vec<f64> = f.finite_knots().iter().chain(g.finite_knots()).copied().collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let small = |x: f64| f.log_pdf(x).max(g.log_pdf(x)) < -80.0;
    let lo0 = breaks[0];
    let hi0 = *breaks.last().unwrap();
    let mut step = 1.0 / 64.0;
    while !small(lo0 - step / 2.0) {
        breaks.insert(0, lo0 - step);
        step *= 2.0;
    }
    let mut step = 1.0 / 64.0;
    while !small(hi0 + step / 2.0) {
        breaks.push(hi0 + step);
        step *= 2.0;
    }
    breaks
}

fn integrate_window(h: &dyn Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|w| cc(h, w[0], w[1], 1e-13, 0)).sum()
}

/// `(tv, hellinger_sq, kl_sq)` by quadrature.
pub fn quad_divergences(f: &PiecewiseLogLinearDensity, g: &PiecewiseLogLinearDensity) -> (f64, f64, f64) {
    let breaks = window(f, g);
    let tv = 0.5 * integrate_window(&|x| (f.pdf(x) - g.pdf(x)).abs(), &breaks);
    let h2 = integrate_window(&|x| (f.pdf(x).sqrt() - g.pdf(x).sqrt()).powi(2), &breaks);
    let leaks = breaks.windows(2).any(|w| {
        (0..=64).any(|i| {
            let x = w[0] + (w[1] - w[0]) * i as f64 / 64.0;
            f.log_pdf(x) > -80.0 && g.log_pdf(x) == f64::NEG_INFINITY
        })
    });
    let kl = if leaks {
        f64::INFINITY
    } else {
        integrate_window(
            &|x| {
                let lf = f.log_pdf(x);
                if lf == f64::NEG_INFINITY {
                    0.0
                } else {
                    lf.exp() * (lf - g.log_pdf(x))
                }
            },
            &breaks,
        )
    };
    (tv, h2, kl)
}

/// A random single-segment exponential with moderate parameters; about a
/// quarter of them have an infinite end.
pub fn random_f1(rng: &mut impl Rng) -> ExpSegmentSpec {
    let alpha: f64 = rng.random_range(-3.0..3.0);
    let s1: f64 = rng.random_range(-2.0..2.0);
    let len: f64 = rng.random_range(0.2..3.0);
    match rng.random_range(0..4) {
        0 if alpha < -0.1 => ExpSegmentSpec::new(alpha, s1, f64::INFINITY),
        0 if alpha > 0.1 => ExpSegmentSpec::new(alpha, f64::NEG_INFINITY, s1),
        _ => ExpSegmentSpec::new(alpha, s1, s1 + len),
    }
    .unwrap()
}

/// A random pair: a third share the first member's support, a third have a
/// second member whose support contains the first's, the rest are independent.
pub fn random_f1_pair(rng: &mut impl Rng) -> (ExpSegmentSpec, ExpSegmentSpec) {
    let f = random_f1(rng);
    let alpha: f64 = rng.random_range(-3.0..3.0);
    let g = match rng.random_range(0..3) {
        0 => ExpSegmentSpec::new(alpha, f.s1, f.s2).ok(),
        1 => {
            let lo = f.s1 - rng.random_range(0.0..1.0);
            let hi = f.s2 + rng.random_range(0.0..1.0);
            ExpSegmentSpec::new(alpha, lo, hi).ok()
        }
        _ => None,
    };
    (f, g.unwrap_or_else(|| random_f1(rng)))
}

/// `∫_0^h e^{a + (b - a) t / h} dt`.
fn seg_integral(a: f64, b: f64, h: f64) -> f64 {
    let d = b - a;
    let rel = if d.abs() < 1e-6 { 1.0 + d / 2.0 + d * d / 6.0 } else { d.exp_m1() / d };
    h * a.exp() * rel
}

/// `Σ w_i φ(x_i) - ∫ e^φ + 1` for `φ` linear between consecutive points.
fn loglik(x: &[f64], w: &[f64], phi: &[f64]) -> f64 {
    let lin: f64 = w.iter().zip(phi).map(|(a, b)| a * b).sum();
    let mass: f64 = (1..x.len()).map(|i| seg_integral(phi[i - 1], phi[i], x[i] - x[i - 1])).sum();
    lin - mass + 1.0
}

/// Values at the points for intercept `params[0]`, first slope `params[1]`
/// and slope decrements `exp(params[2..])` at the interior points in `kinks`.
fn unpack(x: &[f64], kinks: &[usize], params: &[f64]) -> Vec<f64> {
    let mut phi = vec![params[0]];
    let mut slope = params[1];
    let mut k = 0;
    for i in 1..x.len() {
        if i >= 2 && k < kinks.len() && kinks[k] == i - 1 {
            slope -= params[2 + k].exp();
            k += 1;
        }
        phi.push(phi[i - 1] + slope * (x[i] - x[i - 1]));
    }
    phi
}

/// Maximizes `f` by Nelder–Mead from `start`, with restarts.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], scale: f64) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut best = start.to_vec();
    let mut best_val = f(start);
    for restart in 0..12 {
        let size = scale * 0.5f64.powi(restart / 2);
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..d {
            let mut p = best.clone();
            p[i] += size;
            simplex.push(p);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|p| -f(p)).collect();
        for _ in 0..20_000 {
            let mut idx: Vec<usize> = (0..=d).collect();
            idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            if (vals[d] - vals[0]).abs() < 1e-15 {
                break;
            }
            let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64).collect();
            let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (simplex[d][j] - centroid[j])).collect() };
            let r = along(-1.0);
            let fr = -f(&r);
            if fr < vals[0] {
                let e = along(-2.0);
                let fe = -f(&e);
                if fe < fr {
                    simplex[d] = e;
                    vals[d] = fe;
                } else {
                    simplex[d] = r;
                    vals[d] = fr;
                }
            } else if fr < vals[d - 1] {
                simplex[d] = r;
                vals[d] = fr;
            } else {
                let c = if fr < vals[d] { along(-0.5) } else { along(0.5) };
                let fc = -f(&c);
                if fc < vals[d].min(fr) {
                    simplex[d] = c;
                    vals[d] = fc;
                } else {
                    for i in 1..=d {
                        simplex[i] = (0..d).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                        vals[i] = -f(&simplex[i]);
                    }
                }
            }
        }
        let (i, v) = vals.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
        if -v > best_val {
            best_val = -v;
            best = simplex[i].clone();
        }
    }
    (best, best_val)
}

/// Largest `Σ w_i φ(x_i) - ∫ e^φ + 1` over concave `φ` linear between the
/// sorted distinct points `x`, by direct search over every set of interior
/// kinks.
pub fn brute_force_loglik(x: &[f64], w: &[f64]) -> f64 {
    let m = x.len();
    let range = x[m - 1] - x[0];
    let interior: Vec<usize> = (1..m - 1).collect();
    let mut best = f64::NEG_INFINITY;
    for mask in 0..(1u32 << interior.len()) {
        let kinks: Vec<usize> = interior.iter().copied().filter(|&i| mask & (1 << (i - 1)) != 0).collect();
        let mut start = vec![-range.ln(), 0.0];
        start.extend(kinks.iter().map(|_| -(range * range).ln()));
        let obj = |p: &[f64]| loglik(x, w, &unpack(x, &kinks, p));
        let (_, v) = nelder_mead(&obj, &start, 1.0 / range.max(1e-3));
        best = best.max(v);
    }
    best
}
