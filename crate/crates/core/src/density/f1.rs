use serde::{Deserialize, Serialize};

use super::PiecewiseLogLinearDensity;
use crate::error::{Error, Result};

/// Threshold on `|alpha| (s2 - s1)` separating the two bounded canonical
/// shapes from the scaled-exponential one.
pub const CANONICAL_KAPPA_SPLIT: f64 = 18.0;

/// A density proportional to `exp(alpha x)` on `[s1, s2]`.
///
/// Either both endpoints are finite (any `alpha`), or `s1 = -inf` with
/// `alpha > 0`, or `s2 = +inf` with `alpha < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpSegmentSpec {
    pub alpha: f64,
    pub s1: f64,
    pub s2: f64,
}

/// An affine map `x -> a x + b` together with the spec it carries the
/// original density onto.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalForm {
    pub a: f64,
    pub b: f64,
    pub spec: ExpSegmentSpec,
}

impl ExpSegmentSpec {
    pub fn new(alpha: f64, s1: f64, s2: f64) -> Result<Self> {
        let spec = ExpSegmentSpec { alpha, s1, s2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ExpSegmentSpec { alpha, s1, s2 } = *self;
        let ok = if !alpha.is_finite() || s1.is_nan() || s2.is_nan() {
            false
        } else if s1.is_finite() && s2.is_finite() {
            s1 < s2
        } else if s1 == f64::NEG_INFINITY && s2.is_finite() {
            alpha > 0.0
        } else if s1.is_finite() && s2 == f64::INFINITY {
            alpha < 0.0
        } else {
            false
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "({alpha}, {s1}, {s2}) is not a valid exponential segment"
            )))
        }
    }

    /// `alpha (s2 - s1)`; infinite for half-infinite supports.
    pub fn kappa_star(&self) -> f64 {
        if self.alpha == 0.0 {
            0.0
        } else {
            self.alpha * (self.s2 - self.s1)
        }
    }

    /// The normalized density as a single-segment piecewise log-linear density.
    pub fn density(&self) -> Result<PiecewiseLogLinearDensity> {
        self.validate()?;
        let ExpSegmentSpec { alpha, s1, s2 } = *self;
        if s1 == f64::NEG_INFINITY {
            return PiecewiseLogLinearDensity::from_finite(vec![s2], vec![alpha.ln()], Some(alpha), None);
        }
        if s2 == f64::INFINITY {
            return PiecewiseLogLinearDensity::from_finite(vec![s1], vec![(-alpha).ln()], None, Some(alpha));
        }
        let width = s2 - s1;
        if alpha == 0.0 {
            let v = -width.ln();
            return PiecewiseLogLinearDensity::from_finite(vec![s1, s2], vec![v, v], None, None);
        }
        // density at the heavier end is |alpha| / (1 - e^{-kappa})
        let kappa = alpha.abs() * width;
        let peak = alpha.abs().ln() - (-(-kappa).exp_m1()).ln();
        let (v1, v2) = if alpha > 0.0 { (peak - kappa, peak) } else { (peak, peak - kappa) };
        PiecewiseLogLinearDensity::from_finite(vec![s1, s2], vec![v1, v2], None, None)
    }

    /// Law of `a X + b` for `X` with this density.
    pub fn affine_image(&self, a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("affine map ({a}, {b}) is not invertible")));
        }
        let (lo, hi) = if a > 0.0 {
            (a * self.s1 + b, a * self.s2 + b)
        } else {
            (a * self.s2 + b, a * self.s1 + b)
        };
        ExpSegmentSpec::new(self.alpha / a, lo, hi)
    }

    /// Reduces the spec by an affine map to one of three shapes: the uniform
    /// on `[0, 1]`; `exp(-k x)` on `[0, 1]` with `0 < k < 18`; or `exp(-x)`
    /// on `[0, s]` with `s >= 18` (possibly infinite).
    pub fn canonical_form(&self) -> Result<CanonicalForm> {
        self.validate()?;
        let ExpSegmentSpec { alpha, s1, s2 } = *self;
        let kappa = self.kappa_star().abs();
        let (a, b) = if alpha == 0.0 {
            (1.0 / (s2 - s1), -s1 / (s2 - s1))
        } else if kappa < CANONICAL_KAPPA_SPLIT {
            if alpha > 0.0 {
                (-1.0 / (s2 - s1), s2 / (s2 - s1))
            } else {
                (1.0 / (s2 - s1), -s1 / (s2 - s1))
            }
        } else if alpha > 0.0 {
            (-alpha, alpha * s2)
        } else {
            (-alpha, alpha * s1)
        };
        // the image endpoints are fixed by construction; setting them directly
        // avoids rounding in a s + b
        let spec = if alpha == 0.0 {
            ExpSegmentSpec { alpha: 0.0, s1: 0.0, s2: 1.0 }
        } else if kappa < CANONICAL_KAPPA_SPLIT {
            ExpSegmentSpec { alpha: -kappa, s1: 0.0, s2: 1.0 }
        } else {
            ExpSegmentSpec { alpha: -1.0, s1: 0.0, s2: kappa }
        };
        Ok(CanonicalForm { a, b, spec })
    }
}

impl std::fmt::Display for ExpSegmentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", fmt_num(self.alpha), fmt_num(self.s1), fmt_num(self.s2))
    }
}

pub(crate) fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Density;

    #[test]
    fn rejects_outside_parameter_set() {
        assert!(ExpSegmentSpec::new(0.0, 1.0, 1.0).is_err());
        assert!(ExpSegmentSpec::new(-1.0, f64::NEG_INFINITY, 0.0).is_err());
        assert!(ExpSegmentSpec::new(1.0, 0.0, f64::INFINITY).is_err());
        assert!(ExpSegmentSpec::new(0.0, f64::NEG_INFINITY, f64::INFINITY).is_err());
        assert!(ExpSegmentSpec::new(0.0, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn standard_cases() {
        let u = ExpSegmentSpec::new(0.0, 0.0, 1.0).unwrap().density().unwrap();
        assert_eq!(u.pdf(0.5), 1.0);
        let e = ExpSegmentSpec::new(-1.0, 0.0, f64::INFINITY).unwrap().density().unwrap();
        assert!((e.cdf(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((e.quantile(1.0 - (-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-14);
        let t = ExpSegmentSpec::new(-1.0, 0.0, 18.0).unwrap().density().unwrap();
        let norm = 1.0 / (1.0 - (-18.0f64).exp());
        assert!((t.pdf(0.0) - norm).abs() < 1e-15);
    }

    #[test]
    fn canonical_examples() {
        let c = ExpSegmentSpec::new(0.0, 3.0, 7.0).unwrap().canonical_form().unwrap();
        assert_eq!((c.a, c.b), (0.25, -0.75));
        assert_eq!(c.spec, ExpSegmentSpec { alpha: 0.0, s1: 0.0, s2: 1.0 });

        let c = ExpSegmentSpec::new(2.0, 0.0, 3.0).unwrap().canonical_form().unwrap();
        assert!((c.a + 1.0 / 3.0).abs() < 1e-16 && c.b == 1.0);
        assert_eq!(c.spec, ExpSegmentSpec { alpha: -6.0, s1: 0.0, s2: 1.0 });

        let c = ExpSegmentSpec::new(1.0, f64::NEG_INFINITY, 0.0).unwrap().canonical_form().unwrap();
        assert_eq!((c.a, c.b), (-1.0, 0.0));
        assert_eq!(c.spec, ExpSegmentSpec { alpha: -1.0, s1: 0.0, s2: f64::INFINITY });
    }

    #[test]
    fn canonical_spec_is_the_affine_image() {
        let cases = [
            (0.0, -2.0, 5.0),
            (0.7, -1.0, 4.0),
            (-3.0, 2.0, 3.5),
            (2.0, 0.0, 20.0),
            (-0.5, -10.0, 40.0),
            (-2.0, 1.0, f64::INFINITY),
            (4.0, f64::NEG_INFINITY, -1.0),
        ];
        for (alpha, s1, s2) in cases {
            let spec = ExpSegmentSpec::new(alpha, s1, s2).unwrap();
            let c = spec.canonical_form().unwrap();
            let img = spec.affine_image(c.a, c.b).unwrap();
            assert!((img.alpha - c.spec.alpha).abs() < 1e-12, "{spec}");
            assert!((img.s1 - c.spec.s1).abs() < 1e-12, "{spec}");
            assert!(img.s2 == c.spec.s2 || (img.s2 - c.spec.s2).abs() < 1e-9, "{spec}");
        }
    }
}
