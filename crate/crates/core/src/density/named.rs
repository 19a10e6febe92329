use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

use super::f1::fmt_num;
use super::{check_probability, Density, ExpSegmentSpec, PiecewiseLogLinearDensity};
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Parameters of a built-in density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    /// `rate * e^{-rate x}` restricted to `[a, b]` and renormalized.
    TruncatedExponential { rate: f64, a: f64, b: f64 },
    Laplace { mu: f64, scale: f64 },
    Gaussian { mu: f64, sigma: f64 },
    /// Shape restricted to `[1, 2]` so that the density is log-concave with a
    /// concave power factor.
    Gamma { shape: f64, scale: f64 },
    /// Mode `c` in `[a, b]`.
    Triangular { a: f64, c: f64, b: f64 },
    F1(ExpSegmentSpec),
}

/// A built-in density, parsed from strings like `laplace:0,1` or `f1:-1,0,inf`.
#[derive(Debug, Clone)]
pub struct NamedDensity {
    family: Family,
    piecewise: Option<PiecewiseLogLinearDensity>,
    gamma: Option<Gamma>,
    normal: Option<Normal>,
}

impl PartialEq for NamedDensity {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

impl NamedDensity {
    pub fn new(family: Family) -> Result<Self> {
        let mut piecewise = None;
        let mut gamma = None;
        let mut normal = None;
        match family {
            Family::Uniform { a, b } => {
                finite("a", a)?;
                finite("b", b)?;
                piecewise = Some(ExpSegmentSpec::new(0.0, a, b)?.density()?);
            }
            Family::Exponential { rate } => {
                positive("rate", rate)?;
                piecewise = Some(ExpSegmentSpec::new(-rate, 0.0, f64::INFINITY)?.density()?);
            }
            Family::TruncatedExponential { rate, a, b } => {
                positive("rate", rate)?;
                finite("a", a)?;
                finite("b", b)?;
                piecewise = Some(ExpSegmentSpec::new(-rate, a, b)?.density()?);
            }
            Family::Laplace { mu, scale } => {
                finite("mu", mu)?;
                positive("scale", scale)?;
                let peak = -(2.0 * scale).ln();
                piecewise = Some(PiecewiseLogLinearDensity::from_finite(
                    vec![mu],
                    vec![peak],
                    Some(1.0 / scale),
                    Some(-1.0 / scale),
                )?);
            }
            Family::Gaussian { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)?;
                normal = Some(Normal::new(mu, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?);
            }
            Family::Gamma { shape, scale } => {
                positive("scale", scale)?;
                if !(1.0..=2.0).contains(&shape) {
                    return Err(Error::InvalidParameter(format!("gamma shape {shape} outside [1, 2]")));
                }
                gamma = Some(Gamma::new(shape, 1.0 / scale).map_err(|e| Error::InvalidParameter(e.to_string()))?);
            }
            Family::Triangular { a, c, b } => {
                finite("a", a)?;
                finite("c", c)?;
                finite("b", b)?;
                if !(a < b && a <= c && c <= b) {
                    return Err(Error::InvalidParameter(format!("triangular needs a <= c <= b, a < b; got {a},{c},{b}")));
                }
            }
            Family::F1(spec) => {
                piecewise = Some(spec.density()?);
            }
        }
        Ok(NamedDensity { family, piecewise, gamma, normal })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Tilt `gamma` such that `f(x) = e^{gamma x} h(x)` with `h` concave on the
    /// support, for the families that admit one.
    pub fn fstar_gamma(&self) -> Option<f64> {
        match self.family {
            Family::Uniform { .. } | Family::Triangular { .. } => Some(0.0),
            Family::Exponential { rate } | Family::TruncatedExponential { rate, .. } => Some(-rate),
            Family::Gamma { scale, .. } => Some(-1.0 / scale),
            Family::F1(spec) => Some(spec.alpha),
            Family::Laplace { .. } | Family::Gaussian { .. } => None,
        }
    }

    fn triangular_parts(&self) -> (f64, f64, f64) {
        match self.family {
            Family::Triangular { a, c, b } => (a, c, b),
            _ => unreachable!(),
        }
    }
}

impl Density for NamedDensity {
    fn log_pdf(&self, x: f64) -> f64 {
        if let Some(p) = &self.piecewise {
            return p.log_pdf(x);
        }
        match self.family {
            Family::Gaussian { mu, sigma } => {
                let z = (x - mu) / sigma;
                -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
            }
            Family::Gamma { shape, scale } => {
                if x < 0.0 || x.is_nan() || x == f64::INFINITY {
                    return f64::NEG_INFINITY;
                }
                let power = if shape == 1.0 { 0.0 } else { (shape - 1.0) * x.ln() };
                power - x / scale - ln_gamma(shape) - shape * scale.ln()
            }
            Family::Triangular { .. } => {
                let (a, c, b) = self.triangular_parts();
                if !(a..=b).contains(&x) {
                    return f64::NEG_INFINITY;
                }
                let num = if x < c || (x == c && c == b) { x - a } else { b - x };
                let den = if x < c || (x == c && c == b) { c - a } else { b - c };
                (2.0 * num / ((b - a) * den)).ln()
            }
            _ => unreachable!("piecewise families handled above"),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        if let Some(p) = &self.piecewise {
            return p.cdf(x);
        }
        match self.family {
            Family::Gaussian { .. } => self.normal.as_ref().unwrap().cdf(x),
            Family::Gamma { .. } => {
                if x <= 0.0 {
                    0.0
                } else {
                    self.gamma.as_ref().unwrap().cdf(x)
                }
            }
            Family::Triangular { .. } => {
                let (a, c, b) = self.triangular_parts();
                if x <= a {
                    0.0
                } else if x >= b {
                    1.0
                } else if x <= c {
                    (x - a) * (x - a) / ((b - a) * (c - a))
                } else {
                    1.0 - (b - x) * (b - x) / ((b - a) * (b - c))
                }
            }
            _ => unreachable!(),
        }
    }

    fn sf(&self, x: f64) -> f64 {
        if let Some(p) = &self.piecewise {
            return p.sf(x);
        }
        match self.family {
            Family::Gaussian { .. } => self.normal.as_ref().unwrap().sf(x),
            Family::Gamma { .. } => {
                if x <= 0.0 {
                    1.0
                } else {
                    self.gamma.as_ref().unwrap().sf(x)
                }
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        if let Some(d) = &self.piecewise {
            return d.quantile(p);
        }
        Ok(match self.family {
            Family::Gaussian { .. } => self.normal.as_ref().unwrap().inverse_cdf(p),
            Family::Gamma { .. } => self.gamma.as_ref().unwrap().inverse_cdf(p),
            Family::Triangular { .. } => {
                let (a, c, b) = self.triangular_parts();
                let split = (c - a) / (b - a);
                if p <= split {
                    a + (p * (b - a) * (c - a)).sqrt()
                } else {
                    b - ((1.0 - p) * (b - a) * (b - c)).sqrt()
                }
            }
            _ => unreachable!(),
        })
    }

    fn support(&self) -> (f64, f64) {
        if let Some(p) = &self.piecewise {
            return p.support();
        }
        match self.family {
            Family::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Gamma { .. } => (0.0, f64::INFINITY),
            Family::Triangular { a, b, .. } => (a, b),
            _ => unreachable!(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        if let Some(p) = &self.piecewise {
            return p.breakpoints();
        }
        match self.family {
            Family::Gaussian { .. } => vec![],
            Family::Gamma { .. } => vec![0.0],
            Family::Triangular { a, c, b } => {
                let mut v = vec![a, c, b];
                v.dedup();
                v
            }
            _ => unreachable!(),
        }
    }

    fn piecewise(&self) -> Option<Cow<'_, PiecewiseLogLinearDensity>> {
        self.piecewise.as_ref().map(Cow::Borrowed)
    }
}

/// Parses a numeric parameter; `inf`, `+inf` and `-inf` are the only
/// non-finite tokens accepted.
fn parse_param(tok: &str) -> Result<f64> {
    let t = tok.trim();
    match t {
        "inf" | "+inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let lower = t.to_ascii_lowercase();
    if lower.contains("inf") || lower.contains("nan") {
        return Err(Error::Parse(format!("bad number {tok:?}")));
    }
    t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {tok:?}")))
}

impl FromStr for NamedDensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected name:params, got {s:?}")))?;
        let params = if rest.trim().is_empty() {
            vec![]
        } else {
            rest.split(',').map(parse_param).collect::<Result<Vec<_>>>()?
        };
        let want = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::Parse(format!("{name} takes {k} parameters, got {}", params.len())))
            }
        };
        let family = match name.trim() {
            "uniform" => {
                want(2)?;
                Family::Uniform { a: params[0], b: params[1] }
            }
            "exponential" | "exp" => {
                want(1)?;
                Family::Exponential { rate: params[0] }
            }
            "truncexp" => {
                want(3)?;
                Family::TruncatedExponential { rate: params[0], a: params[1], b: params[2] }
            }
            "laplace" => {
                want(2)?;
                Family::Laplace { mu: params[0], scale: params[1] }
            }
            "gaussian" | "normal" => {
                want(2)?;
                Family::Gaussian { mu: params[0], sigma: params[1] }
            }
            "gamma" => {
                want(2)?;
                Family::Gamma { shape: params[0], scale: params[1] }
            }
            "triangular" => {
                want(3)?;
                Family::Triangular { a: params[0], c: params[1], b: params[2] }
            }
            "f1" => {
                want(3)?;
                Family::F1(ExpSegmentSpec { alpha: params[0], s1: params[1], s2: params[2] })
            }
            other => return Err(Error::Parse(format!("unknown density {other:?}"))),
        };
        NamedDensity::new(family)
    }
}

impl fmt::Display for NamedDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = fmt_num;
        match self.family {
            Family::Uniform { a, b } => write!(f, "uniform:{},{}", n(a), n(b)),
            Family::Exponential { rate } => write!(f, "exponential:{}", n(rate)),
            Family::TruncatedExponential { rate, a, b } => {
                write!(f, "truncexp:{},{},{}", n(rate), n(a), n(b))
            }
            Family::Laplace { mu, scale } => write!(f, "laplace:{},{}", n(mu), n(scale)),
            Family::Gaussian { mu, sigma } => write!(f, "gaussian:{},{}", n(mu), n(sigma)),
            Family::Gamma { shape, scale } => write!(f, "gamma:{},{}", n(shape), n(scale)),
            Family::Triangular { a, c, b } => write!(f, "triangular:{},{},{}", n(a), n(c), n(b)),
            Family::F1(spec) => write!(f, "f1:{spec}"),
        }
    }
}
