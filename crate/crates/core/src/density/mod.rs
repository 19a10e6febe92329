//! Density families: piecewise log-linear densities (the estimator's output
//! type), single-segment exponential families, k-affine specifications and
//! the built-in benchmark truths.

mod f1;
mod kaffine;
mod named;
mod piecewise;

use std::borrow::Cow;

use rand::RngCore;

use crate::error::Result;
use crate::rng::open01;

pub use f1::{CanonicalForm, ExpSegmentSpec};
pub use kaffine::{AffinePiece, KAffineSpec};
pub use named::{Family, NamedDensity};
pub use piecewise::{PiecewiseLogLinearDensity, Segment};
pub use crate::special::segment_mass;

/// A univariate probability density with distribution and quantile functions.
pub trait Density: Send + Sync {
    /// `log f(x)`; `-inf` outside the support.
    fn log_pdf(&self, x: f64) -> f64;

    fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    fn cdf(&self, x: f64) -> f64;

    /// `1 - F(x)`, evaluated without cancellation where the implementation can.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Inverse of the distribution function on `(0, 1)`.
    fn quantile(&self, p: f64) -> Result<f64>;

    /// Closure of `{x : f(x) > 0}` as `(lo, hi)`, endpoints possibly infinite.
    fn support(&self) -> (f64, f64);

    /// Finite points where the density is not smooth (support endpoints,
    /// knots, modes of triangular densities).
    fn breakpoints(&self) -> Vec<f64>;

    /// Exact piecewise log-linear representation, when one exists.
    fn piecewise(&self) -> Option<Cow<'_, PiecewiseLogLinearDensity>> {
        None
    }

    /// `∫ f`; one for every density in this crate.
    fn total_mass(&self) -> f64 {
        1.0
    }

    /// `n` inverse-CDF draws.
    fn sample(&self, rng: &mut dyn RngCore, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                self.quantile(open01(rng))
                    .expect("open01 draws lie strictly inside (0, 1)")
            })
            .collect()
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(crate::error::Error::InvalidProbability(p))
    }
}
