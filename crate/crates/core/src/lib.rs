//! Univariate log-concave density estimation.
//!
//! * [`mle`] computes the log-concave maximum likelihood estimator and
//!   certifies it through its optimality conditions.
//! * [`density`] holds the density families: piecewise log-linear densities,
//!   single-segment exponentials, k-affine densities and named benchmarks.
//! * [`divergence`] evaluates total variation, squared Hellinger,
//!   Kullback–Leibler, empirical log-ratio and Kolmogorov–type distances,
//!   exactly for piecewise log-linear pairs.
//! * [`marshall`] compares the estimator's CDF error with the empirical CDF
//!   error for exponentially tilted concave truths.
//! * [`experiments`] runs seeded Monte-Carlo risk studies and fits rates.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod density;
pub mod divergence;
pub mod error;
pub mod experiments;
pub mod marshall;
pub mod mle;
pub mod quad;
pub mod rng;
pub mod special;

pub use density::{
    AffinePiece, CanonicalForm, Density, ExpSegmentSpec, Family, KAffineSpec, NamedDensity,
    PiecewiseLogLinearDensity, Segment,
};

pub use divergence::{DivergenceKind, DivergenceValue, Method};
pub use error::{Error, Result};
pub use experiments::{BoundCurve, BoundPoint, LossKind, RateFit, RiskRow, RiskTable};
pub use marshall::{FStarDensity, MarshallReport};
pub use mle::{fit_mle, FitOptions, MleFit, Residuals, WeightedSample};
pub use special::{q, rho};
