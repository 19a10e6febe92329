use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{Density, PiecewiseLogLinearDensity};
use crate::error::{Error, Result};

/// Relative tolerance for continuity of `log f` where two pieces meet.
const CONTINUITY_TOLERANCE: f64 = 1e-9;

/// `log f(x) = slope * x + intercept` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl AffinePiece {
    fn log_pdf(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// A log-concave density whose logarithm is affine on each of `k` abutting
/// intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct KAffineSpec {
    pieces: Vec<AffinePiece>,
    masses: Vec<f64>,
    density: PiecewiseLogLinearDensity,
}

impl KAffineSpec {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidDensity(m));
        if pieces.is_empty() {
            return invalid("no pieces".into());
        }
        let k = pieces.len();
        for (j, p) in pieces.iter().enumerate() {
            if p.lo.is_nan() || p.hi.is_nan() || !(p.lo < p.hi) {
                return invalid(format!("piece {j} has an empty interval"));
            }
            if !p.slope.is_finite() || !p.intercept.is_finite() {
                return invalid(format!("piece {j} has non-finite coefficients"));
            }
            if (p.lo == f64::NEG_INFINITY && j != 0) || (p.hi == f64::INFINITY && j != k - 1) {
                return invalid(format!("piece {j} is unbounded on an interior side"));
            }
            if p.hi == f64::NEG_INFINITY || p.lo == f64::INFINITY {
                return invalid(format!("piece {j} has an empty interval"));
            }
        }
        for (j, w) in pieces.windows(2).enumerate() {
            if w[0].hi < w[1].lo {
                return invalid(format!("gap between pieces {j} and {}", j + 1));
            }
            if w[0].hi > w[1].lo {
                return invalid(format!("pieces {j} and {} overlap", j + 1));
            }
            let t = w[0].hi;
            let (left, right) = (w[0].log_pdf(t), w[1].log_pdf(t));
            if (left - right).abs() > CONTINUITY_TOLERANCE * left.abs().max(right.abs()).max(1.0) {
                return invalid(format!("log-density jumps at {t}"));
            }
        }
        let mut knots = Vec::with_capacity(k + 1);
        let mut values = Vec::with_capacity(k + 1);
        knots.push(pieces[0].lo);
        if pieces[0].lo.is_finite() {
            values.push(pieces[0].log_pdf(pieces[0].lo));
        }
        for (j, p) in pieces.iter().enumerate() {
            knots.push(p.hi);
            if p.hi.is_finite() {
                // average both sides at shared knots to absorb rounding
                let v = match pieces.get(j + 1) {
                    Some(next) => 0.5 * (p.log_pdf(p.hi) + next.log_pdf(p.hi)),
                    None => p.log_pdf(p.hi),
                };
                values.push(v);
            }
        }
        let left_tail = pieces[0].lo.is_infinite().then_some(pieces[0].slope);
        let right_tail = pieces[k - 1].hi.is_infinite().then_some(pieces[k - 1].slope);
        let density = PiecewiseLogLinearDensity::new(knots, values, left_tail, right_tail)?;
        let masses = pieces.iter().map(|p| density.mass_between(p.lo, p.hi)).collect();
        Ok(KAffineSpec { pieces, masses, density })
    }

    /// Pieces of an existing piecewise log-linear density, one per segment.
    pub fn from_density(density: &PiecewiseLogLinearDensity) -> Result<Self> {
        let pieces = density
            .segments()
            .into_iter()
            .map(|s| AffinePiece {
                lo: s.lo,
                hi: s.hi,
                slope: s.slope,
                intercept: s.phi_anchor - s.slope * s.anchor,
            })
            .collect();
        Self::new(pieces)
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    /// Probability of each piece under this density.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn density(&self) -> &PiecewiseLogLinearDensity {
        &self.density
    }

    pub fn k(&self) -> usize {
        self.pieces.len()
    }
}

impl Density for KAffineSpec {
    fn log_pdf(&self, x: f64) -> f64 {
        self.density.log_pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        self.density.cdf(x)
    }
    fn sf(&self, x: f64) -> f64 {
        self.density.sf(x)
    }
    fn quantile(&self, p: f64) -> Result<f64> {
        self.density.quantile(p)
    }
    fn support(&self) -> (f64, f64) {
        self.density.support()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.density.breakpoints()
    }
    fn piecewise(&self) -> Option<Cow<'_, PiecewiseLogLinearDensity>> {
        Some(Cow::Borrowed(&self.density))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace() -> KAffineSpec {
        let c = 0.5f64.ln();
        KAffineSpec::new(vec![
            AffinePiece { lo: f64::NEG_INFINITY, hi: 0.0, slope: 1.0, intercept: c },
            AffinePiece { lo: 0.0, hi: f64::INFINITY, slope: -1.0, intercept: c },
        ])
        .unwrap()
    }

    #[test]
    fn laplace_two_pieces() {
        let l = laplace();
        assert!((l.cdf(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(l.masses().len(), 2);
        assert!((l.masses()[0] - 0.5).abs() < 1e-15);
        assert_eq!(l.k(), 2);
    }

    #[test]
    fn rejects_gaps_jumps_and_convexity() {
        let p = |lo, hi, slope, intercept| AffinePiece { lo, hi, slope, intercept };
        // gap
        assert!(KAffineSpec::new(vec![p(0.0, 0.4, 0.0, 0.0), p(0.6, 1.2, 0.0, 0.0)]).is_err());
        // jump
        assert!(KAffineSpec::new(vec![p(0.0, 0.5, 0.0, 0.1), p(0.5, 1.0, 0.0, -0.1)]).is_err());
        // convex kink
        let c = -(2.0f64 * (0.5f64.exp() - 1.0)).ln();
        assert!(KAffineSpec::new(vec![p(0.0, 0.5, -1.0, c + 0.5), p(0.5, 1.0, 1.0, c - 0.5)]).is_err());
        // mass 2
        assert!(KAffineSpec::new(vec![p(0.0, 2.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn round_trips_through_density() {
        let l = laplace();
        let back = KAffineSpec::from_density(l.density()).unwrap();
        assert_eq!(back.pieces(), l.pieces());
    }
}
