use std::borrow::Cow;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{check_probability, Density};
use crate::error::{Error, Result};
use crate::special::{exprel, segment_mass, SegmentMoments};

/// Mass tolerance enforced at construction.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// Relative slack allowed when checking that slopes are nonincreasing.
const CONCAVITY_SLACK: f64 = 1e-9;

/// A log-concave density whose logarithm is affine between consecutive knots.
///
/// The finite knots `t_0 < ... < t_k` carry the log-density values; an
/// infinite support end is represented by an exponential tail with a
/// sign-correct slope (positive on the left, negative on the right).
/// The density vanishes outside the support.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLogLinearDensity {
    xs: Vec<f64>,
    phis: Vec<f64>,
    left_tail: Option<f64>,
    right_tail: Option<f64>,
    slopes: Vec<f64>,
    seg_mass: Vec<f64>,
    left_mass: f64,
    right_mass: f64,
    /// F(xs[i])
    lower: Vec<f64>,
    /// 1 - F(xs[i]), accumulated from the right
    upper: Vec<f64>,
}

/// One affine piece of `log f`, possibly a half-infinite tail.
///
/// `log f(x) = phi_anchor + slope * (x - anchor)` on `[lo, hi]`, where the
/// anchor is the left end of finite and right-tail segments and the right end
/// of the left tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub anchor: f64,
    pub phi_anchor: f64,
    pub slope: f64,
}

impl Segment {
    pub fn log_pdf(&self, x: f64) -> f64 {
        self.phi_anchor + self.slope * (x - self.anchor)
    }
}

impl PiecewiseLogLinearDensity {
    /// Builds and validates a density.
    ///
    /// `knots` lists every support endpoint and interior knot in strictly
    /// increasing order, with `-inf`/`+inf` allowed only as the first/last
    /// entry; `log_values` has one entry per finite knot. A tail slope must be
    /// given exactly when the corresponding end is infinite.
    pub fn new(
        knots: Vec<f64>,
        log_values: Vec<f64>,
        left_tail: Option<f64>,
        right_tail: Option<f64>,
    ) -> Result<Self> {
        let density = Self::unchecked_mass(knots, log_values, left_tail, right_tail)?;
        let mass = density.raw_mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "total mass {mass} differs from 1 by more than {MASS_TOLERANCE:e}"
            )));
        }
        Ok(density)
    }

    /// Like [`new`](Self::new), but shifts the log-values so the density
    /// integrates to one.
    pub fn normalized(
        knots: Vec<f64>,
        log_values: Vec<f64>,
        left_tail: Option<f64>,
        right_tail: Option<f64>,
    ) -> Result<Self> {
        let density = Self::unchecked_mass(knots, log_values, left_tail, right_tail)?;
        let shift = density.raw_mass().ln();
        if !shift.is_finite() {
            return Err(Error::InvalidDensity("mass is not normalizable".into()));
        }
        let phis = density.phis.iter().map(|p| p - shift).collect();
        Self::from_finite(density.xs, phis, density.left_tail, density.right_tail)
    }

    fn unchecked_mass(
        knots: Vec<f64>,
        log_values: Vec<f64>,
        left_tail: Option<f64>,
        right_tail: Option<f64>,
    ) -> Result<Self> {
        if knots.iter().any(|k| k.is_nan()) {
            return Err(Error::InvalidDensity("NaN knot".into()));
        }
        let left_inf = knots.first() == Some(&f64::NEG_INFINITY);
        let right_inf = knots.last() == Some(&f64::INFINITY);
        let xs: Vec<f64> = knots.iter().copied().filter(|k| k.is_finite()).collect();
        let expected = knots.len() - left_inf as usize - right_inf as usize;
        if xs.len() != expected {
            return Err(Error::InvalidDensity(
                "infinite knots may only appear as the first or last entry".into(),
            ));
        }
        if left_inf != left_tail.is_some() || right_inf != right_tail.is_some() {
            return Err(Error::InvalidDensity(
                "a tail slope is required exactly when the support end is infinite".into(),
            ));
        }
        Self::from_finite(xs, log_values, left_tail, right_tail)
    }

    /// Builds from finite knots only; the tails imply infinite support ends.
    pub(crate) fn from_finite(
        xs: Vec<f64>,
        phis: Vec<f64>,
        left_tail: Option<f64>,
        right_tail: Option<f64>,
    ) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidDensity("no finite knots".into()));
        }
        if xs.len() != phis.len() {
            return Err(Error::InvalidDensity(format!(
                "{} finite knots but {} log-values",
                xs.len(),
                phis.len()
            )));
        }
        if xs.len() == 1 && left_tail.is_none() && right_tail.is_none() {
            return Err(Error::InvalidDensity("support is a single point".into()));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDensity("knots must be strictly increasing".into()));
        }
        if phis.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidDensity("log-values must be finite".into()));
        }
        if let Some(s) = left_tail {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidDensity(format!("left tail slope {s} must be > 0")));
            }
        }
        if let Some(s) = right_tail {
            if !(s < 0.0 && s.is_finite()) {
                return Err(Error::InvalidDensity(format!("right tail slope {s} must be < 0")));
            }
        }
        let slopes: Vec<f64> = xs
            .windows(2)
            .zip(phis.windows(2))
            .map(|(x, p)| (p[1] - p[0]) / (x[1] - x[0]))
            .collect();
        let chain: Vec<f64> = left_tail
            .into_iter()
            .chain(slopes.iter().copied())
            .chain(right_tail)
            .collect();
        for w in chain.windows(2) {
            let slack = CONCAVITY_SLACK * w[0].abs().max(w[1].abs()).max(1.0);
            if w[1] > w[0] + slack {
                return Err(Error::InvalidDensity(format!(
                    "slopes must be nonincreasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let seg_mass: Vec<f64> = xs
            .windows(2)
            .zip(phis.windows(2))
            .zip(&slopes)
            .map(|((x, p), &b)| segment_mass(b, p[0], p[1], x[0], x[1]))
            .collect();
        let left_mass = left_tail.map_or(0.0, |s| phis[0].exp() / s);
        let right_mass = right_tail.map_or(0.0, |s| phis[phis.len() - 1].exp() / -s);
        let mut lower = Vec::with_capacity(xs.len());
        let mut acc = left_mass;
        lower.push(acc);
        for m in &seg_mass {
            acc += m;
            lower.push(acc);
        }
        let mut upper = vec![0.0; xs.len()];
        let mut acc = right_mass;
        upper[xs.len() - 1] = acc;
        for i in (0..seg_mass.len()).rev() {
            acc += seg_mass[i];
            upper[i] = acc;
        }
        let total = lower[xs.len() - 1] + right_mass;
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::InvalidDensity(format!("mass {total} is not positive and finite")));
        }
        Ok(PiecewiseLogLinearDensity {
            xs,
            phis,
            left_tail,
            right_tail,
            slopes,
            seg_mass,
            left_mass,
            right_mass,
            lower,
            upper,
        })
    }

    fn raw_mass(&self) -> f64 {
        self.lower[self.xs.len() - 1] + self.right_mass
    }

    /// All knots, including `-inf`/`+inf` support ends.
    pub fn knots(&self) -> Vec<f64> {
        let mut k = Vec::with_capacity(self.xs.len() + 2);
        if self.left_tail.is_some() {
            k.push(f64::NEG_INFINITY);
        }
        k.extend_from_slice(&self.xs);
        if self.right_tail.is_some() {
            k.push(f64::INFINITY);
        }
        k
    }

    pub fn finite_knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn log_values(&self) -> &[f64] {
        &self.phis
    }

    /// Slopes of `log f` between consecutive finite knots.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn left_tail(&self) -> Option<f64> {
        self.left_tail
    }

    pub fn right_tail(&self) -> Option<f64> {
        self.right_tail
    }

    /// Masses of the finite segments.
    pub fn segment_masses(&self) -> &[f64] {
        &self.seg_mass
    }

    /// Every affine piece, tails included, from left to right.
    pub fn segments(&self) -> Vec<Segment> {
        let n = self.xs.len();
        let mut out = Vec::with_capacity(n + 1);
        if let Some(s) = self.left_tail {
            out.push(Segment {
                lo: f64::NEG_INFINITY,
                hi: self.xs[0],
                anchor: self.xs[0],
                phi_anchor: self.phis[0],
                slope: s,
            });
        }
        for i in 0..n - 1 {
            out.push(Segment {
                lo: self.xs[i],
                hi: self.xs[i + 1],
                anchor: self.xs[i],
                phi_anchor: self.phis[i],
                slope: self.slopes[i],
            });
        }
        if let Some(s) = self.right_tail {
            out.push(Segment {
                lo: self.xs[n - 1],
                hi: f64::INFINITY,
                anchor: self.xs[n - 1],
                phi_anchor: self.phis[n - 1],
                slope: s,
            });
        }
        out
    }

    /// Index `i` of the finite segment `[xs[i], xs[i+1]]` holding `x`, for
    /// `x` within the finite knot range.
    fn segment_index(&self, x: f64) -> usize {
        let i = self.xs.partition_point(|&k| k <= x);
        i.saturating_sub(1).min(self.xs.len().saturating_sub(2))
    }

    /// Density of `a X + b` when `X` has this density (`a != 0`).
    pub fn affine_image(&self, a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("affine map ({a}, {b}) is not invertible")));
        }
        let shift = a.abs().ln();
        let mut xs: Vec<f64> = self.xs.iter().map(|x| a * x + b).collect();
        let mut phis: Vec<f64> = self.phis.iter().map(|p| p - shift).collect();
        let (lt, rt) = if a > 0.0 {
            (self.left_tail.map(|s| s / a), self.right_tail.map(|s| s / a))
        } else {
            xs.reverse();
            phis.reverse();
            (self.right_tail.map(|s| s / a), self.left_tail.map(|s| s / a))
        };
        Self::from_finite(xs, phis, lt, rt)
    }

    /// `∫_lo^hi f`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// `∫_lo^hi (F(x) - F(lo)) dx` for finite `lo <= hi`, computed segment by
    /// segment so that it stays accurate when the interval is short.
    pub fn excess_cdf_integral(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut total = 0.0;
        let mut acc_mass = 0.0; // F(u) - F(lo)
        let mut u = lo;
        while u < hi {
            let (seg_end, phi_u, slope) = self.piece_at(u);
            let v = seg_end.min(hi);
            let width = v - u;
            if width <= 0.0 {
                break;
            }
            match (phi_u, slope) {
                (Some(phi), b) => {
                    let m = SegmentMoments::new(0.0, b * width);
                    // ∫_u^v ∫_u^x f = e^{phi} width^2 ∫_0^1 (1-t) e^{b width t} dt
                    total += width * acc_mass + phi.exp() * width * width * m.left;
                    acc_mass += width * phi.exp() * exprel(b * width);
                }
                (None, _) => total += width * acc_mass,
            }
            u = v;
        }
        total
    }

    /// For `u` in the support (or outside it), returns the end of the affine
    /// piece starting at `u`, `log f(u)` if positive there, and the slope.
    fn piece_at(&self, u: f64) -> (f64, Option<f64>, f64) {
        let n = self.xs.len();
        let (lo, hi) = self.support();
        if u < lo {
            return (lo, None, 0.0);
        }
        if u >= hi {
            return (f64::INFINITY, None, 0.0);
        }
        if u < self.xs[0] {
            let s = self.left_tail.expect("left of first knot inside support");
            return (self.xs[0], Some(self.phis[0] + s * (u - self.xs[0])), s);
        }
        if u >= self.xs[n - 1] {
            let s = self.right_tail.expect("right of last knot inside support");
            return (f64::INFINITY, Some(self.phis[n - 1] + s * (u - self.xs[n - 1])), s);
        }
        let i = self.segment_index(u);
        let b = self.slopes[i];
        (self.xs[i + 1], Some(self.phis[i] + b * (u - self.xs[i])), b)
    }

    /// Mass to the right of `x` inside finite segment `i`.
    fn mass_in_segment_right_of(&self, i: usize, x: f64) -> f64 {
        let phi_x = self.phis[i] + self.slopes[i] * (x - self.xs[i]);
        segment_mass(self.slopes[i], phi_x, self.phis[i + 1], x, self.xs[i + 1])
    }

    fn mass_in_segment_left_of(&self, i: usize, x: f64) -> f64 {
        let phi_x = self.phis[i] + self.slopes[i] * (x - self.xs[i]);
        segment_mass(self.slopes[i], self.phis[i], phi_x, self.xs[i], x)
    }
}

impl Density for PiecewiseLogLinearDensity {
    fn log_pdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x.is_nan() {
            return f64::NAN;
        }
        if x < self.xs[0] {
            return match self.left_tail {
                Some(s) if x.is_finite() => self.phis[0] + s * (x - self.xs[0]),
                _ => f64::NEG_INFINITY,
            };
        }
        if x > self.xs[n - 1] {
            return match self.right_tail {
                Some(s) if x.is_finite() => self.phis[n - 1] + s * (x - self.xs[n - 1]),
                _ => f64::NEG_INFINITY,
            };
        }
        let i = self.segment_index(x);
        if n == 1 || x == self.xs[i] {
            return self.phis[i];
        }
        if x == self.xs[i + 1] {
            return self.phis[i + 1];
        }
        self.phis[i] + self.slopes[i] * (x - self.xs[i])
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x.is_nan() {
            return f64::NAN;
        }
        if x < self.xs[0] {
            return match self.left_tail {
                Some(s) => (self.phis[0] + s * (x - self.xs[0])).exp() / s,
                None => 0.0,
            };
        }
        if x >= self.xs[n - 1] {
            return match self.right_tail {
                Some(s) => {
                    let d = x - self.xs[n - 1];
                    let tail = self.phis[n - 1].exp() * (-(s * d).exp_m1()) / -s;
                    (self.lower[n - 1] + tail).min(1.0)
                }
                None => 1.0,
            };
        }
        let i = self.segment_index(x);
        (self.lower[i] + self.mass_in_segment_left_of(i, x)).min(1.0)
    }

    fn sf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x.is_nan() {
            return f64::NAN;
        }
        if x >= self.xs[n - 1] {
            return match self.right_tail {
                Some(s) => (self.phis[n - 1] + s * (x - self.xs[n - 1])).exp() / -s,
                None => 0.0,
            };
        }
        if x < self.xs[0] {
            return match self.left_tail {
                Some(s) => {
                    let d = self.xs[0] - x;
                    let tail = self.phis[0].exp() * (-(-s * d).exp_m1()) / s;
                    (self.upper[0] + tail).min(1.0)
                }
                None => 1.0,
            };
        }
        let i = self.segment_index(x);
        (self.upper[i + 1] + self.mass_in_segment_right_of(i, x)).min(1.0)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let n = self.xs.len();
        if p < self.left_mass {
            let s = self.left_tail.expect("positive left mass implies a left tail");
            // e^{phi_0 + s (x - x_0)} / s = p
            return Ok(self.xs[0] + ((p * s).ln() - self.phis[0]) / s);
        }
        let last = self.lower[n - 1];
        if p >= last {
            return Ok(match self.right_tail {
                Some(s) => {
                    let r = p - last;
                    // e^{phi}(1 - e^{s d}) / -s = r
                    let arg = r * s * (-self.phis[n - 1]).exp();
                    if arg <= -1.0 {
                        f64::INFINITY
                    } else {
                        self.xs[n - 1] + arg.ln_1p() / s
                    }
                }
                None => self.xs[n - 1],
            });
        }
        let i = self.lower.partition_point(|&c| c <= p).saturating_sub(1).min(n - 2);
        let r = p - self.lower[i];
        let width = self.xs[i + 1] - self.xs[i];
        let b = self.slopes[i];
        let base = self.phis[i].exp();
        let d = if (b * width).abs() < 1e-12 {
            r / base
        } else {
            let arg = b * r / base;
            if arg <= -1.0 {
                width
            } else {
                arg.ln_1p() / b
            }
        };
        Ok(self.xs[i] + d.clamp(0.0, width))
    }

    fn support(&self) -> (f64, f64) {
        let lo = if self.left_tail.is_some() { f64::NEG_INFINITY } else { self.xs[0] };
        let hi = if self.right_tail.is_some() {
            f64::INFINITY
        } else {
            self.xs[self.xs.len() - 1]
        };
        (lo, hi)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.xs.clone()
    }

    fn piecewise(&self) -> Option<Cow<'_, PiecewiseLogLinearDensity>> {
        Some(Cow::Borrowed(self))
    }

    fn total_mass(&self) -> f64 {
        self.raw_mass()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonNumber {
    Num(f64),
    Text(String),
}

fn encode_knot(x: f64) -> JsonNumber {
    if x == f64::INFINITY {
        JsonNumber::Text("inf".into())
    } else if x == f64::NEG_INFINITY {
        JsonNumber::Text("-inf".into())
    } else {
        JsonNumber::Num(x)
    }
}

fn decode_knot(v: JsonNumber) -> std::result::Result<f64, String> {
    match v {
        JsonNumber::Num(x) => Ok(x),
        JsonNumber::Text(s) => match s.as_str() {
            "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
            "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
            other => Err(format!("unrecognized knot value {other:?}")),
        },
    }
}

#[derive(Serialize, Deserialize)]
struct DensityJson {
    knots: Vec<JsonNumber>,
    log_values: Vec<f64>,
    left_tail: Option<f64>,
    right_tail: Option<f64>,
}

impl Serialize for PiecewiseLogLinearDensity {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DensityJson {
            knots: self.knots().into_iter().map(encode_knot).collect(),
            log_values: self.phis.clone(),
            left_tail: self.left_tail,
            right_tail: self.right_tail,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PiecewiseLogLinearDensity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = DensityJson::deserialize(deserializer)?;
        let knots = raw
            .knots
            .into_iter()
            .map(decode_knot)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        PiecewiseLogLinearDensity::new(knots, raw.log_values, raw.left_tail, raw.right_tail)
            .map_err(serde::de::Error::custom)
    }
}
