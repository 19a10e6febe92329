//! Adaptive quadrature on finite and infinite intervals.
//!
//! Thin layer over the double-exponential rule of the `quadrature` crate: the
//! rule is applied on the whole range, and ranges whose error estimate exceeds
//! the tolerance are bisected. Infinite ranges are mapped onto `[0, 1)`.

const MAX_DEPTH: u32 = 40;

/// `∫_a^b f` to roughly `tol` absolute error. `a` and `b` may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_dyn(&f, a, b, tol)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate_dyn(f, b, a, tol);
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(f, a, b, tol, 0),
        (true, false) => {
            // x = a + t/(1-t)
            let g = |t: f64| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            };
            adaptive(&g, 0.0, 1.0, tol, 0)
        }
        (false, true) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            };
            adaptive(&g, 0.0, 1.0, tol, 0)
        }
        (false, false) => integrate_dyn(f, a, 0.0, tol / 2.0) + integrate_dyn(f, 0.0, b, tol / 2.0),
    }
}

/// Integrates over consecutive breakpoints, so that kinks and jumps of the
/// integrand at known locations do not slow convergence.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    if breaks.len() < 2 {
        return 0.0;
    }
    let per = tol / (breaks.len() - 1) as f64;
    breaks.windows(2).map(|w| integrate(&f, w[0], w[1], per)).sum()
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth >= MAX_DEPTH {
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    if !(mid > a && mid < b) {
        return out.integral;
    }
    adaptive(f, a, mid, tol / 2.0, depth + 1) + adaptive(f, mid, b, tol / 2.0, depth + 1)
}
