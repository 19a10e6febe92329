//! Scalar special functions: the Marshall multiplier `q`/`rho` and stable
//! integrals of `exp(affine)` over segments.

/// Below this magnitude `q` is evaluated from its power series.
const Q_SERIES_RADIUS: f64 = 1.0;
const Q_SERIES_TERMS: usize = 30;

/// Below this magnitude the `t^k e^{vt}` moments use their power series.
const MOMENT_SERIES_RADIUS: f64 = 1.0;
const MOMENT_SERIES_TERMS: usize = 28;

/// `E(u) = (e^u - 1) / u`, switching to `1 + u/2 + u^2/6` for `|u| < 1e-8`.
pub fn exprel(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 + u * (0.5 + u / 6.0)
    } else if u > 700.0 {
        // keep the quotient finite as long as the true value is
        (u - u.ln()).exp() - 1.0 / u
    } else {
        u.exp_m1() / u
    }
}

/// The continuous, strictly increasing map
/// `q(x) = (x - 2 + e^{-x}(x+2)) / (x (1 - e^{-x}(x+1)))`, `q(0) = 1/3`.
///
/// Defined on the extended line with `q(-inf) = 0` and `q(+inf) = 1`.
pub fn q(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x.abs() < Q_SERIES_RADIUS {
        // numerator and denominator both vanish like x^3:
        //   N/x^3 = sum_j (-1)^j (j+1)/(j+3)! x^j
        //   D/x^3 = sum_j (-1)^j (j+1)/(j+2)! x^j
        let mut num = 0.0;
        let mut den = 0.0;
        let mut pow = 1.0; // (-x)^j
        let mut fact2 = 2.0; // (j+2)!
        for j in 0..Q_SERIES_TERMS {
            let jf = j as f64;
            let fact3 = fact2 * (jf + 3.0);
            num += pow * (jf + 1.0) / fact3;
            den += pow * (jf + 1.0) / fact2;
            pow *= -x;
            fact2 = fact3;
        }
        return num / den;
    }
    if x > 0.0 {
        if x > 700.0 {
            // e^{-x} underflows; q = 1 - 2/x + x/(e^x - 1 - x)
            return 1.0 - 2.0 / x;
        }
        let e = (-x).exp();
        (x - 2.0 + e * (x + 2.0)) / (x * (1.0 - e * (x + 1.0)))
    } else {
        // multiply through by e^{x} to avoid overflow of e^{-x}
        let e = x.exp();
        (e * (x - 2.0) + x + 2.0) / (x * (e - x - 1.0))
    }
}

/// `1 - q(x)`, accurate when `q` is close to one.
fn one_minus_q(x: f64) -> f64 {
    if x > 40.0 {
        // 1 - q = 2/x - x/(e^x - 1 - x)
        let tail = if x > 700.0 { 0.0 } else { x / (x.exp() - 1.0 - x) };
        2.0 / x - tail
    } else {
        1.0 - q(x)
    }
}

/// `rho(x) = (1 + q(x)) / (1 - q(x))`; `rho(+inf) = +inf`.
pub fn rho(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::INFINITY;
    }
    let omq = one_minus_q(x);
    (2.0 - omq) / omq
}

/// Moments `∫_0^1 t^k e^{v t} dt` for `k = 0, 1, 2`, valid for `v <= 0`.
fn tilted_moments(v: f64) -> [f64; 3] {
    debug_assert!(v <= 0.0);
    if v > -MOMENT_SERIES_RADIUS {
        // sum_j v^j / (j! (j + k + 1))
        let mut m = [0.0; 3];
        let mut term = 1.0; // v^j / j!
        for j in 0..MOMENT_SERIES_TERMS {
            let jf = j as f64;
            m[0] += term / (jf + 1.0);
            m[1] += term / (jf + 2.0);
            m[2] += term / (jf + 3.0);
            term *= v / (jf + 1.0);
        }
        m
    } else {
        let e = v.exp();
        let v2 = v * v;
        [
            v.exp_m1() / v,
            (e * (v - 1.0) + 1.0) / v2,
            (e * (v2 - 2.0 * v + 2.0) - 2.0) / (v2 * v),
        ]
    }
}

/// Weighted integrals of `g(t) = exp((1-t) a + t b)` over `t ∈ [0, 1]`.
///
/// These are the building blocks of segment masses, their gradients and
/// Hessians with respect to the endpoint log-values, and of integrated CDFs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMoments {
    /// `∫ g`
    pub mass: f64,
    /// `∫ (1-t) g`
    pub left: f64,
    /// `∫ t g`
    pub right: f64,
    /// `∫ (1-t)^2 g`
    pub left_left: f64,
    /// `∫ t (1-t) g`
    pub left_right: f64,
    /// `∫ t^2 g`
    pub right_right: f64,
}

impl SegmentMoments {
    pub fn new(a: f64, b: f64) -> Self {
        // anchor at the larger endpoint so the exponent is never positive
        let (hi, v, mirrored) = if b <= a { (a, b - a, false) } else { (b, a - b, true) };
        let [m0, m1, m2] = tilted_moments(v);
        let scale = hi.exp();
        // relative to the anchored endpoint: near = ∫ s^k with s measured from the anchor
        let near0 = m0;
        let far1 = m1; // ∫ s e^{vs}, s = distance from anchor
        let near1 = m0 - m1; // ∫ (1-s) e^{vs}
        let far2 = m2;
        let near2 = m0 - 2.0 * m1 + m2;
        let cross = m1 - m2;
        let (left, right, ll, rr) = if mirrored {
            (far1, near1, far2, near2)
        } else {
            (near1, far1, near2, far2)
        };
        SegmentMoments {
            mass: scale * near0,
            left: scale * left,
            right: scale * right,
            left_left: scale * ll,
            left_right: scale * cross,
            right_right: scale * rr,
        }
    }
}

/// `∫_lo^hi e^{φ(x)} dx` for affine `φ` with `φ(lo) = phi_lo`, `φ(hi) = phi_hi`.
///
/// The slope argument is accepted for interface symmetry with callers that
/// already hold it; the computation uses the endpoint values only.
pub fn segment_mass(_slope: f64, phi_lo: f64, phi_hi: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    if phi_hi <= phi_lo {
        width * phi_lo.exp() * exprel(phi_hi - phi_lo)
    } else {
        width * phi_hi.exp() * exprel(phi_lo - phi_hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_at_zero_is_one_third() {
        assert!((q(0.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn q_at_two_matches_closed_form() {
        let e2 = (-2.0f64).exp();
        let expected = 2.0 * e2 / (1.0 - 3.0 * e2);
        assert!((q(2.0) - expected).abs() < 1e-15);
        // 50-digit evaluation
        assert!((q(2.0) - 0.455_678_841_855_605_4).abs() < 1e-15);
    }

    #[test]
    fn q_at_ten_respects_upper_bound() {
        let v = q(10.0);
        assert!(v <= 0.9);
        assert!((v - 0.800_454_226_137_807_1).abs() < 1e-15);
    }

    #[test]
    fn q_series_and_closed_form_agree_at_branch_boundary() {
        // values from 50-digit evaluation
        let cases = [
            (1.0, 0.392_211_191_177_332_8),
            (-1.0, 0.281_718_171_540_954_8),
            (0.5, 0.361_993_867_092_269_1),
            (-0.5, 0.306_515_501_276_810_2),
            (1e-3, 0.333_388_892_592_283_9),
        ];
        for (x, want) in cases {
            assert!((q(x) - want).abs() < 1e-15, "q({x}) = {}", q(x));
        }
        for x in [1.0, -1.0] {
            let below = q(x * (1.0 - 1e-12));
            assert!((below - q(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn q_limits_and_extremes() {
        assert_eq!(q(f64::INFINITY), 1.0);
        assert_eq!(q(f64::NEG_INFINITY), 0.0);
        assert!(q(1e6) < 1.0 && q(1e6) > 0.99);
        assert!(q(-1e6) > 0.0 && q(-1e6) < 1e-5);
        assert!(q(-800.0).is_finite());
    }

    #[test]
    fn rho_values() {
        assert!((rho(0.0) - 2.0).abs() < 1e-12);
        assert!((rho(2.0) - 2.674_301_412_089_240_5).abs() < 1e-13);
        assert!((rho(100.0) - 99.0).abs() < 1e-10);
        assert!(rho(100.0) <= 200.0);
        assert_eq!(rho(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn q_monotone_on_dense_grid() {
        let mut prev = q(-50.0);
        for i in 1..=10_000 {
            let x = -50.0 + 100.0 * i as f64 / 10_000.0;
            let v = q(x);
            assert!(v > prev, "not increasing at {x}");
            assert!(v > 0.0 && v < 1.0);
            if x >= 2.0 {
                assert!(v <= 1.0 - 1.0 / x);
            }
            prev = v;
        }
    }

    #[test]
    fn rho_below_max_three_two_x() {
        for i in 0..=5_000 {
            let x = 50.0 * i as f64 / 5_000.0;
            assert!(rho(x) <= 3.0f64.max(2.0 * x) + 1e-12, "x = {x}");
        }
    }

    #[test]
    fn exprel_branches() {
        assert_eq!(exprel(0.0), 1.0);
        assert!((exprel(1e-9) - (1.0 + 5e-10)).abs() < 1e-16);
        assert!((exprel(1.0) - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!(exprel(-1e3) > 0.0);
    }

    #[test]
    fn segment_mass_examples() {
        assert_eq!(segment_mass(0.0, 0.0, 0.0, 0.0, 1.0), 1.0);
        let want = 1.0 - (-1.0f64).exp();
        assert!((segment_mass(-1.0, 0.0, -1.0, 0.0, 1.0) - want).abs() < 1e-15);
        assert!((segment_mass(1.0, -1.0, 0.0, 0.0, 1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn moments_match_simpson() {
        for &(a, b) in &[(0.0, 0.0), (0.3, -2.0), (-1.0, 4.0), (2.0, 2.0 + 1e-9), (-30.0, 5.0)] {
            let m = SegmentMoments::new(a, b);
            let k = 20_000;
            let mut acc = [0.0f64; 6];
            for i in 0..=k {
                let t = i as f64 / k as f64;
                let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let g = ((1.0 - t) * a + t * b).exp() * w / (3.0 * k as f64);
                acc[0] += g;
                acc[1] += (1.0 - t) * g;
                acc[2] += t * g;
                acc[3] += (1.0 - t) * (1.0 - t) * g;
                acc[4] += t * (1.0 - t) * g;
                acc[5] += t * t * g;
            }
            let got = [m.mass, m.left, m.right, m.left_left, m.left_right, m.right_right];
            for (g, w) in got.iter().zip(acc) {
                assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "a={a} b={b}: {g} vs {w}");
            }
        }
    }
}
