//! Shared inputs for the criterion benchmarks.

use logconcave::rng::stream_rng;
use logconcave::{Density, NamedDensity};

/// `n` seeded draws from a named density.
pub fn draws(spec: &str, n: usize, seed: u64) -> Vec<f64> {
    let truth: NamedDensity = spec.parse().expect("valid density spec");
    truth.sample(&mut stream_rng(seed, n as u64), n)
}
