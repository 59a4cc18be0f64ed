//! Scalar special functions on top of `libm`.

pub(crate) use libm::{erfc, exp, expm1, fabs as abs, log as ln, log1p, sqrt};

pub(crate) const SQRT_2: f64 = core::f64::consts::SQRT_2;
pub(crate) const SQRT_PI: f64 = 1.772_453_850_905_516;
/// 1/√(2π)
pub(crate) const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// ln √(2π)
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub(crate) fn norm_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * exp(-0.5 * t * t)
}

/// Standard normal CDF Φ.
#[cfg(test)]
pub(crate) fn norm_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / SQRT_2)
}

/// Standard normal survival function 1 − Φ, accurate in the upper tail.
#[inline]
pub(crate) fn norm_sf(t: f64) -> f64 {
    0.5 * erfc(t / SQRT_2)
}

/// Scaled complementary error function e^{x²}·erfc(x) for x ≥ 0.
pub(crate) fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 26.0 {
        exp(x * x) * erfc(x)
    } else {
        // Asymptotic series; the first omitted term is below 1e-15 relative here.
        let r = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..8 {
            term *= -((2 * k - 1) as f64) * r;
            sum += term;
        }
        sum / (x * SQRT_PI)
    }
}

/// Mills ratio (1 − Φ(t))/φ(t) for t ≥ 0, without underflow.
#[inline]
pub(crate) fn mills(t: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    SQRT_PI / SQRT_2 * erfcx(t / SQRT_2)
}

/// P(a < T < b) for T standard normal, accurate when both ends sit in one tail.
pub(crate) fn std_interval_prob(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        norm_sf(a) - norm_sf(b)
    } else if b <= 0.0 {
        norm_sf(-b) - norm_sf(-a)
    } else {
        1.0 - norm_sf(b) - norm_sf(-a)
    }
}

/// Mean and natural-log probability of a standard normal restricted to (a, b).
///
/// Tail cells are evaluated through Mills ratios so the mean keeps full
/// precision long after the cell probability itself has left f64 range.
pub(crate) fn std_truncated(a: f64, b: f64) -> (f64, f64) {
    if a >= 0.0 {
        tail_truncated(a, b)
    } else if b <= 0.0 {
        let (m, lp) = tail_truncated(-b, -a);
        (-m, lp)
    } else {
        let p = 1.0 - norm_sf(b) - norm_sf(-a);
        let pa = if a.is_infinite() { 0.0 } else { norm_pdf(a) };
        let pb = if b.is_infinite() { 0.0 } else { norm_pdf(b) };
        ((pa - pb) / p, ln(p))
    }
}

// 0 ≤ a < b ≤ ∞
fn tail_truncated(a: f64, b: f64) -> (f64, f64) {
    let ma = mills(a);
    let (r, mb) = if b.is_infinite() {
        (0.0, 0.0)
    } else {
        (exp(-0.5 * (b - a) * (b + a)), mills(b))
    };
    let one_minus_r = if b.is_infinite() { 1.0 } else { -expm1(-0.5 * (b - a) * (b + a)) };
    let denom = ma - r * mb;
    let mean = one_minus_r / denom;
    let log_prob = -0.5 * a * a - LN_SQRT_2PI + ln(denom);
    (mean, log_prob)
}

/// ln(e^a + e^b) with -∞ handled.
#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}
