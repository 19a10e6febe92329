//! Distances between densities.
//!
//! For two piecewise log-linear densities everything except `dks_n` is exact:
//! on each cell of the common refinement of their knots both log-densities
//! are affine, so the integrands are exponentials of affine functions (times
//! an affine factor for Kullback–Leibler), and crossing points solve a linear
//! equation. Other pairs fall back to adaptive quadrature over the union of
//! breakpoints, and supremum distances to a quantile-grid scan refined by
//! golden-section search.

use serde::{Deserialize, Serialize, Serializer};

use crate::density::{Density, PiecewiseLogLinearDensity};
use crate::error::{Error, Result};
use crate::mle::WeightedSample;
use crate::quad::integrate_pieces;
use crate::special::{segment_mass, SegmentMoments};

/// Absolute tolerance of quadrature fallbacks.
pub const QUADRATURE_TOL: f64 = 1e-11;
/// Bracket width at which golden-section refinement of a supremum stops.
pub const SCAN_TOL: f64 = 1e-12;
/// Grid points per distribution in supremum scans.
const SCAN_POINTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Tv,
    HellingerSq,
    KlSq,
    DxSq,
    Ks,
    DksN,
}

impl std::str::FromStr for DivergenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tv" => DivergenceKind::Tv,
            "hellinger_sq" => DivergenceKind::HellingerSq,
            "kl_sq" => DivergenceKind::KlSq,
            "dx_sq" => DivergenceKind::DxSq,
            "ks" => DivergenceKind::Ks,
            "dks_n" => DivergenceKind::DksN,
            other => return Err(Error::Parse(format!("unknown divergence {other:?}"))),
        })
    }
}

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact up to floating-point rounding.
    ClosedForm,
    /// Adaptive quadrature to [`QUADRATURE_TOL`].
    Quadrature,
    /// Grid scan refined to [`SCAN_TOL`] in the abscissa.
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceValue {
    pub kind: DivergenceKind,
    /// `+inf` serializes as the string `"inf"`.
    #[serde(serialize_with = "ser_value", deserialize_with = "de_value")]
    pub value: f64,
    pub method: Method,
}

fn ser_value<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if *v == f64::INFINITY {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_value<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        N(f64),
        S(String),
    }
    match V::deserialize(d)? {
        V::N(x) => Ok(x),
        V::S(s) if s == "inf" => Ok(f64::INFINITY),
        V::S(s) => Err(serde::de::Error::custom(format!("bad value {s:?}"))),
    }
}

impl DivergenceValue {
    fn new(kind: DivergenceKind, value: f64, method: Method) -> Self {
        DivergenceValue { kind, value, method }
    }
}

/// `log f = c + s u` on a cell, with `u >= 0` measured from the cell's anchor.
#[derive(Debug, Clone, Copy)]
struct Affine {
    c: f64,
    s: f64,
}

/// A cell of the common refinement, mapped to `u ∈ [0, len]`.
#[derive(Debug, Clone, Copy)]
struct Cell {
    len: f64,
    f: Option<Affine>,
    g: Option<Affine>,
}

/// `∫_0^len e^{c + s u} du`.
fn mass(a: Affine, len: f64) -> f64 {
    if len.is_infinite() {
        (a.c).exp() / -a.s
    } else {
        segment_mass(a.s, a.c, a.c + a.s * len, 0.0, len)
    }
}

/// `∫_0^len u e^{c + s u} du`.
fn first_moment(a: Affine, len: f64) -> f64 {
    if len.is_infinite() {
        a.c.exp() / (a.s * a.s)
    } else {
        len * len * SegmentMoments::new(a.c, a.c + a.s * len).right
    }
}

fn shift(a: Affine, by: f64) -> Affine {
    Affine { c: a.c + a.s * by, s: a.s }
}

fn affine_on(d: &PiecewiseLogLinearDensity, lo: f64, hi: f64) -> Option<Affine> {
    let (slo, shi) = d.support();
    if lo < slo || hi > shi {
        return None;
    }
    let probe = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (false, true) => hi - 1.0,
        (true, false) => lo + 1.0,
        (false, false) => 0.0,
    };
    let segs = d.segments();
    let i = segs.partition_point(|s| s.hi < probe).min(segs.len() - 1);
    let seg = segs[i];
    if hi.is_finite() && !lo.is_finite() {
        // reflected: u = hi - x
        Some(Affine { c: seg.log_pdf(hi), s: -seg.slope })
    } else {
        Some(Affine { c: seg.log_pdf(lo), s: seg.slope })
    }
}

fn cells(f: &PiecewiseLogLinearDensity, g: &PiecewiseLogLinearDensity) -> Vec<Cell> {
    let mut breaks: Vec<f64> = f.finite_knots().iter().chain(g.finite_knots()).copied().collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend(breaks);
    edges.push(f64::INFINITY);
    edges
        .windows(2)
        .filter_map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let cell = Cell { len: hi - lo, f: affine_on(f, lo, hi), g: affine_on(g, lo, hi) };
            (cell.f.is_some() || cell.g.is_some()).then_some(cell)
        })
        .collect()
}

/// Root in `(0, len)` of `fa(u) = ga(u)`, if any.
fn crossing(fa: Affine, ga: Affine, len: f64) -> Option<f64> {
    let ds = fa.s - ga.s;
    if ds == 0.0 {
        return None;
    }
    let u = (ga.c - fa.c) / ds;
    (u > 0.0 && u < len).then_some(u)
}

fn exact_pair<'a>(f: &'a dyn Density, g: &'a dyn Density) -> Option<Vec<Cell>> {
    let fp = f.piecewise()?;
    let gp = g.piecewise()?;
    Some(cells(&fp, &gp))
}

fn union_breaks(f: &dyn Density, g: &dyn Density) -> Vec<f64> {
    let (flo, fhi) = f.support();
    let (glo, ghi) = g.support();
    let lo = flo.min(glo);
    let hi = fhi.max(ghi);
    let mut b: Vec<f64> = f
        .breakpoints()
        .into_iter()
        .chain(g.breakpoints())
        .filter(|x| *x > lo && *x < hi)
        .collect();
    b.push(lo);
    b.push(hi);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Total variation distance `½ ∫ |f - g|`.
pub fn tv(f: &dyn Density, g: &dyn Density) -> DivergenceValue {
    let kind = DivergenceKind::Tv;
    if let Some(cells) = exact_pair(f, g) {
        let mut total = 0.0;
        for cell in cells {
            total += match (cell.f, cell.g) {
                (Some(a), None) | (None, Some(a)) => mass(a, cell.len),
                (Some(a), Some(b)) => match crossing(a, b, cell.len) {
                    Some(u) => {
                        (mass(a, u) - mass(b, u)).abs()
                            + (mass(shift(a, u), cell.len - u) - mass(shift(b, u), cell.len - u)).abs()
                    }
                    None => (mass(a, cell.len) - mass(b, cell.len)).abs(),
                },
                (None, None) => 0.0,
            };
        }
        return DivergenceValue::new(kind, (0.5 * total).clamp(0.0, 1.0), Method::ClosedForm);
    }
    let v = integrate_pieces(|x| (f.pdf(x) - g.pdf(x)).abs(), &union_breaks(f, g), QUADRATURE_TOL);
    DivergenceValue::new(kind, (0.5 * v).clamp(0.0, 1.0), Method::Quadrature)
}

/// Squared Hellinger distance `∫ (√f - √g)²`.
pub fn hellinger_sq(f: &dyn Density, g: &dyn Density) -> DivergenceValue {
    let kind = DivergenceKind::HellingerSq;
    if let Some(cells) = exact_pair(f, g) {
        let mut total = 0.0;
        for cell in cells {
            total += match (cell.f, cell.g) {
                (Some(a), None) | (None, Some(a)) => mass(a, cell.len),
                (Some(a), Some(b)) => {
                    let mid = Affine { c: 0.5 * (a.c + b.c), s: 0.5 * (a.s + b.s) };
                    mass(a, cell.len) + mass(b, cell.len) - 2.0 * mass(mid, cell.len)
                }
                (None, None) => 0.0,
            };
        }
        return DivergenceValue::new(kind, total.clamp(0.0, 2.0), Method::ClosedForm);
    }
    let v = integrate_pieces(
        |x| {
            let d = f.pdf(x).sqrt() - g.pdf(x).sqrt();
            d * d
        },
        &union_breaks(f, g),
        QUADRATURE_TOL,
    );
    DivergenceValue::new(kind, v.clamp(0.0, 2.0), Method::Quadrature)
}

/// Kullback–Leibler divergence `∫ f log(f/g)`; `+inf` unless the support of
/// `f` lies inside that of `g`.
pub fn kl_sq(f: &dyn Density, g: &dyn Density) -> DivergenceValue {
    let kind = DivergenceKind::KlSq;
    let (flo, fhi) = f.support();
    let (glo, ghi) = g.support();
    if flo < glo || fhi > ghi {
        return DivergenceValue::new(kind, f64::INFINITY, Method::ClosedForm);
    }
    if let Some(cells) = exact_pair(f, g) {
        let mut total = 0.0;
        for cell in cells {
            match (cell.f, cell.g) {
                (Some(_), None) => return DivergenceValue::new(kind, f64::INFINITY, Method::ClosedForm),
                (Some(a), Some(b)) => {
                    let dc = a.c - b.c;
                    let ds = a.s - b.s;
                    total += dc * mass(a, cell.len);
                    if ds != 0.0 {
                        total += ds * first_moment(a, cell.len);
                    }
                }
                _ => {}
            }
        }
        return DivergenceValue::new(kind, total.max(0.0), Method::ClosedForm);
    }
    let mut breaks: Vec<f64> = f
        .breakpoints()
        .into_iter()
        .chain(g.breakpoints())
        .filter(|x| *x > flo && *x < fhi)
        .collect();
    breaks.push(flo);
    breaks.push(fhi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let v = integrate_pieces(
        |x| {
            let lf = f.log_pdf(x);
            if lf == f64::NEG_INFINITY {
                0.0
            } else {
                lf.exp() * (lf - g.log_pdf(x))
            }
        },
        &breaks,
        QUADRATURE_TOL,
    );
    DivergenceValue::new(kind, v.max(0.0), Method::Quadrature)
}

/// Empirical log-likelihood ratio `Σ w_i log(f̂(x_i)/f₀(x_i))`.
pub fn dx_sq(estimate: &dyn Density, sample: &WeightedSample, f0: &dyn Density) -> Result<DivergenceValue> {
    let mut total = 0.0;
    for (&x, &w) in sample.points().iter().zip(sample.weights()) {
        let l0 = f0.log_pdf(x);
        if l0 == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("reference density vanishes at sample point {x}")));
        }
        total += w * (estimate.log_pdf(x) - l0);
    }
    Ok(DivergenceValue::new(DivergenceKind::DxSq, total, Method::ClosedForm))
}

/// `|F(x) - G(x)|`, using survival functions in the upper half.
fn cdf_gap(f: &dyn Density, g: &dyn Density, x: f64) -> f64 {
    let fc = f.cdf(x);
    if fc > 0.5 {
        (g.sf(x) - f.sf(x)).abs()
    } else {
        (fc - g.cdf(x)).abs()
    }
}

/// Kolmogorov distance `sup |F - G|` between two densities.
pub fn ks(f: &dyn Density, g: &dyn Density) -> DivergenceValue {
    let kind = DivergenceKind::Ks;
    if let (Some(fp), Some(gp)) = (f.piecewise(), g.piecewise()) {
        // extrema sit where the densities cross or at knots
        let mut candidates: Vec<f64> = fp.finite_knots().iter().chain(gp.finite_knots()).copied().collect();
        let mut breaks = candidates.clone();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend(breaks);
        edges.push(f64::INFINITY);
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if let (Some(a), Some(b)) = (affine_on(&fp, lo, hi), affine_on(&gp, lo, hi)) {
                if let Some(u) = crossing(a, b, hi - lo) {
                    candidates.push(if lo.is_finite() { lo + u } else { hi - u });
                }
            }
        }
        let v = candidates.iter().map(|&x| cdf_gap(f, g, x)).fold(0.0, f64::max);
        return DivergenceValue::new(kind, v.min(1.0), Method::ClosedForm);
    }
    let grid = scan_grid(f, g);
    let v = sup_scan(|x| cdf_gap(f, g, x), &grid);
    DivergenceValue::new(kind, v.min(1.0), Method::Scan)
}

/// `sup |F_n - F₀|` for the empirical distribution of `sample`; exact, since
/// the supremum is approached at the jumps.
pub fn ks_empirical(sample: &WeightedSample, f0: &dyn Density) -> DivergenceValue {
    ks_steps(sample.points(), sample.cumulative(), f0)
}

/// [`ks_empirical`] for raw observations (any count, ties allowed).
pub fn ks_observations(obs: &[f64], f0: &dyn Density) -> DivergenceValue {
    let mut sorted = obs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    let mut cumulative = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        if points.last() == Some(&x) {
            *cumulative.last_mut().unwrap() = (i + 1) as f64 / n;
        } else {
            points.push(x);
            cumulative.push((i + 1) as f64 / n);
        }
    }
    ks_steps(&points, &cumulative, f0)
}

fn ks_steps(points: &[f64], cumulative: &[f64], f0: &dyn Density) -> DivergenceValue {
    let mut sup = 0.0f64;
    let mut below = 0.0;
    for (&x, &c) in points.iter().zip(cumulative) {
        let fx = f0.cdf(x);
        sup = sup.max((fx - below).abs()).max((fx - c).abs());
        below = c;
    }
    DivergenceValue::new(DivergenceKind::Ks, sup, Method::ClosedForm)
}

/// `sup |F^n - G^n| + sup |(1-F)^n - (1-G)^n|`, the discrepancy between the
/// laws of the sample maximum and minimum.
pub fn dks_n(f: &dyn Density, g: &dyn Density, n: usize) -> Result<DivergenceValue> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let k = n as i32;
    let grid = scan_grid(f, g);
    let upper = sup_scan(|x| (f.cdf(x).powi(k) - g.cdf(x).powi(k)).abs(), &grid);
    let lower = sup_scan(|x| (f.sf(x).powi(k) - g.sf(x).powi(k)).abs(), &grid);
    Ok(DivergenceValue::new(DivergenceKind::DksN, upper + lower, Method::Scan))
}

/// Quantiles of both distributions on a uniform grid and in the far tails,
/// plus all breakpoints.
fn scan_grid(f: &dyn Density, g: &dyn Density) -> Vec<f64> {
    let mut probs: Vec<f64> = (0..SCAN_POINTS).map(|i| (i as f64 + 0.5) / SCAN_POINTS as f64).collect();
    for j in 5..=15 {
        let p = 10f64.powi(-j);
        probs.push(p);
        probs.push(1.0 - p);
    }
    let mut grid: Vec<f64> = Vec::with_capacity(2 * probs.len() + 16);
    for d in [f, g] {
        for &p in &probs {
            if let Ok(x) = d.quantile(p) {
                grid.push(x);
            }
        }
        grid.extend(d.breakpoints());
        let (lo, hi) = d.support();
        grid.push(lo);
        grid.push(hi);
    }
    grid.retain(|x| x.is_finite());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Maximum of `h` over a sorted grid, with each local maximum refined by
/// golden-section search between its neighbours.
fn sup_scan<H: Fn(f64) -> f64>(h: H, grid: &[f64]) -> f64 {
    let vals: Vec<f64> = grid.iter().map(|&x| h(x)).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    let top = best;
    for i in 0..grid.len() {
        let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < grid.len() { vals[i + 1] } else { f64::NEG_INFINITY };
        // only refine peaks that could matter
        if vals[i] >= left && vals[i] >= right && vals[i] > 0.5 * top {
            let a = if i > 0 { grid[i - 1] } else { grid[i] };
            let b = if i + 1 < grid.len() { grid[i + 1] } else { grid[i] };
            best = best.max(golden_max(&h, a, b));
        }
    }
    best
}

fn golden_max<H: Fn(f64) -> f64>(h: &H, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut best = h(a).max(h(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut hc = h(c);
    let mut hd = h(d);
    for _ in 0..200 {
        if (b - a) <= SCAN_TOL * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if hc >= hd {
            b = d;
            d = c;
            hd = hc;
            c = b - INV_PHI * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + INV_PHI * (b - a);
            hd = h(d);
        }
        best = best.max(hc).max(hd);
    }
    best
}

/// Evaluates `kind` between two densities; `n` is required for `dks_n`.
/// `dx_sq` needs a sample and is rejected here.
pub fn between(kind: DivergenceKind, f: &dyn Density, g: &dyn Density, n: Option<usize>) -> Result<DivergenceValue> {
    match kind {
        DivergenceKind::Tv => Ok(tv(f, g)),
        DivergenceKind::HellingerSq => Ok(hellinger_sq(f, g)),
        DivergenceKind::KlSq => Ok(kl_sq(f, g)),
        DivergenceKind::Ks => Ok(ks(f, g)),
        DivergenceKind::DksN => {
            let n = n.ok_or_else(|| Error::InvalidParameter("dks_n needs n".into()))?;
            dks_n(f, g, n)
        }
        DivergenceKind::DxSq => Err(Error::InvalidParameter("dx_sq is computed from a fit and its sample".into())),
    }
}
