//! Gaussian-expectation engine.
//!
//! [`GaussHermiteRule`] covers smooth integrands. Integrands with kinks
//! (clippers, quantizer likelihoods) are handled by [`composite`] rules:
//! Gauss-Legendre panels split at the breakpoints, weighted by the Gaussian
//! density and truncated where the Gaussian mass is below 1e-22.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{abs, exp, ln, sqrt, std_truncated, INV_SQRT_2PI, SQRT_PI};

pub const DEFAULT_ORDER: usize = 129;
pub const MAX_ORDER: usize = 512;
/// Half-width, in standard deviations, of the truncated Gaussian support
/// used by composite rules.
pub const SPAN_SDS: f64 = 10.0;
/// Gauss-Legendre points per composite panel.
const PANEL_POINTS: usize = 8;
const LN_FLOOR: f64 = -690.775_527_898_213_7; // ln 1e-300

/// Gauss-Hermite rule for the weight e^{-t²} (physicists' convention).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermiteRule {
    /// Nodes are eigenvalues of the Jacobi matrix, polished by Newton steps
    /// on the orthonormal Hermite recurrence.
    ///
    /// Above order ~350 the outermost weights fall below the smallest f64;
    /// those nodes carry no mass and are dropped, so `nodes().len()` may be
    /// smaller than `order()`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(invalid("order", alloc::format!("{order} not in 1..={MAX_ORDER}")));
        }
        let n = order;
        let pim4 = 1.0 / sqrt(SQRT_PI);
        let off: Vec<f64> = (1..n).map(|k| sqrt(k as f64 / 2.0)).collect();
        let mut guesses = symmetric_tridiagonal_eigenvalues(&alloc::vec![0.0; n], &off)?;
        guesses.sort_by(f64::total_cmp);
        let mut nodes: Vec<f64> = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (i, &guess) in guesses.iter().enumerate() {
            // Polish the lower half and the center; mirror the rest.
            let mirror = n - 1 - i;
            if mirror < i {
                let (z, w) = (-nodes[mirror], weights[mirror]);
                nodes.push(z);
                weights.push(w);
                continue;
            }
            let mut z = if mirror == i { 0.0 } else { guess };
            let mut pp = 0.0;
            for _ in 0..8 {
                let (p1, p2) = hermite_orthonormal(n, z, pim4);
                pp = sqrt(2.0 * n as f64) * p2;
                let step = p1 / pp;
                z -= step;
                if abs(step) <= 1e-15 * abs(z).max(1.0) {
                    let (_, p2) = hermite_orthonormal(n, z, pim4);
                    pp = sqrt(2.0 * n as f64) * p2;
                    break;
                }
            }
            if abs(z - guess) > 1e-6 * abs(guess).max(1.0) {
                return Err(Error::NonConvergence { quantity: "hermite node", coarse: guess, fine: z });
            }
            nodes.push(z);
            // 2/pp² in log space; pp² overflows for large orders.
            weights.push(exp(ln(2.0) - 2.0 * ln(abs(pp))));
        }
        let (nodes, weights): (Vec<f64>, Vec<f64>) =
            nodes.into_iter().zip(weights).filter(|&(_, wi)| wi > 0.0).unzip();
        if nodes.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::NonConvergence { quantity: "hermite node ordering", coarse: 0.0, fine: 0.0 });
        }
        Ok(Self { order, nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ e^{-t²} f(t) dt
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

// Returns (ψ_n(z), ψ_{n-1}(z)) without the e^{-z²/2} factor.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * sqrt(2.0 / (jf + 1.0)) * p2 - sqrt(jf / (jf + 1.0)) * p3;
    }
    (p1, p2)
}

// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
// Wilkinson shifts.
fn symmetric_tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = abs(d[m]) + abs(d[m + 1]);
                if abs(e[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NonConvergence { quantity: "tridiagonal eigenvalue", coarse: d[l], fine: e[l] });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendreRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendreRule {
    pub fn new(points: usize) -> Result<Self> {
        if points == 0 || points > MAX_ORDER {
            return Err(invalid("points", alloc::format!("{points} not in 1..={MAX_ORDER}")));
        }
        let n = points;
        let mut x = alloc::vec![0.0; n];
        let mut w = alloc::vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut pp = 1.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if abs(z - z1) <= 1e-16 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            let wi = 2.0 / ((1.0 - z * z) * pp * pp);
            w[i] = wi;
            w[n - 1 - i] = wi;
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        Ok(Self { nodes: x, weights: w })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A discrete measure: nodes and (Lebesgue or probability) weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sum<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// N(mean, variance) expectations from a Gauss-Hermite rule.
    pub fn hermite(rule: &GaussHermiteRule, mean: f64, variance: f64) -> Self {
        let scale = sqrt(2.0 * variance);
        Self {
            nodes: rule.nodes.iter().map(|&t| mean + scale * t).collect(),
            weights: rule.weights.iter().map(|&w| w / SQRT_PI).collect(),
        }
    }

    /// N(mean, variance) expectations from composite Gauss-Legendre panels on
    /// mean ± [`SPAN_SDS`]·sd, split at `breakpoints`, panel width at most
    /// `width(x)` at the panel start.
    pub fn gaussian_composite<W: Fn(f64) -> f64>(
        mean: f64,
        variance: f64,
        breakpoints: &[f64],
        width: W,
    ) -> Self {
        let sd = sqrt(variance);
        let mut rule = composite(mean - SPAN_SDS * sd, mean + SPAN_SDS * sd, breakpoints, width);
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter_mut()) {
            let t = (x - mean) / sd;
            *w *= INV_SQRT_2PI / sd * exp(-0.5 * t * t);
        }
        rule
    }
}

/// Composite Gauss-Legendre rule for ∫_lo^hi f(x) dx.
pub fn composite<W: Fn(f64) -> f64>(lo: f64, hi: f64, breakpoints: &[f64], width: W) -> WeightedRule {
    let gl = GaussLegendreRule::new(PANEL_POINTS).expect("fixed panel order is valid");
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(hi);
    let mut rule = WeightedRule::default();
    let mut left = lo;
    for &right in &cuts {
        while left < right {
            let mut step = width(left);
            step = step.min(width((left + step).min(right)));
            let step = step.max((right - left) * 1e-12).max(f64::MIN_POSITIVE);
            let end = if left + step >= right { right } else { left + step };
            let half = 0.5 * (end - left);
            let mid = 0.5 * (end + left);
            for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
                rule.nodes.push(mid + half * t);
                rule.weights.push(w * half);
            }
            left = end;
        }
        left = right;
    }
    rule
}

/// E[f(X)] for X ~ N(mean, variance). Exact (f(mean)) when variance is zero.
pub fn gaussian_expectation<F: FnMut(f64) -> f64>(
    mut f: F,
    mean: f64,
    variance: f64,
    rule: &GaussHermiteRule,
) -> Result<f64> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(invalid("variance", "must be finite and non-negative"));
    }
    if variance == 0.0 {
        let v = f(mean);
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidQuery(alloc::format!("integrand not finite at {mean}")))
        };
    }
    let scale = sqrt(2.0 * variance);
    let mut acc = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let x = mean + scale * t;
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::InvalidQuery(alloc::format!("integrand not finite at {x}")));
        }
        acc += w * v;
    }
    Ok(acc / SQRT_PI)
}

/// E[X | lower < X < upper] for X ~ N(mean, variance).
pub fn truncated_gaussian_mean(lower: f64, upper: f64, mean: f64, variance: f64) -> Result<f64> {
    truncated_gaussian(lower, upper, mean, variance).map(|(m, _)| m)
}

/// Mean and natural-log probability of the cell (lower, upper) under N(mean, variance).
pub(crate) fn truncated_gaussian(lower: f64, upper: f64, mean: f64, variance: f64) -> Result<(f64, f64)> {
    if !(lower < upper) {
        return Err(invalid("cell", alloc::format!("lower {lower} must be below upper {upper}")));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(invalid("variance", "must be finite and positive"));
    }
    let sd = sqrt(variance);
    let (m, log_prob) = std_truncated((lower - mean) / sd, (upper - mean) / sd);
    if !(log_prob >= LN_FLOOR) {
        return Err(Error::Underflow { lower, upper });
    }
    Ok((mean + sd * m, log_prob))
}

/// Closed-form E[T^k] for T ~ N(0, 1/2), the moments of e^{-t²}/√π.
pub fn hermite_weight_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    // (k-1)!! / 2^{k/2}
    let mut m = 1.0;
    let mut j = 1;
    while j < k {
        m *= j as f64;
        j += 2;
    }
    m / libm::pow(2.0, (k / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_and_two() {
        let r1 = GaussHermiteRule::new(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert!((r1.weights()[0] - SQRT_PI).abs() < 1e-15);
        let r2 = GaussHermiteRule::new(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((r2.nodes()[0] + s).abs() < 1e-15 && (r2.nodes()[1] - s).abs() < 1e-15);
        for &w in r2.weights() {
            assert!((w - SQRT_PI / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn order_bounds() {
        assert!(GaussHermiteRule::new(0).is_err());
        assert!(GaussHermiteRule::new(513).is_err());
    }

    #[test]
    fn zero_variance_is_point_evaluation() {
        let r = GaussHermiteRule::new(5).unwrap();
        let v = gaussian_expectation(|x| x * x + 1.0, 3.0, 0.0, &r).unwrap();
        assert_eq!(v, 10.0);
    }

    #[test]
    fn nonfinite_integrand_rejected() {
        let r = GaussHermiteRule::new(8).unwrap();
        assert!(gaussian_expectation(|x| 1.0 / x.max(0.0), 0.0, 1.0, &r).is_err());
    }

    #[test]
    fn truncated_mean_cases() {
        let inf = f64::INFINITY;
        assert!((truncated_gaussian_mean(-inf, inf, 1.7, 2.0).unwrap() - 1.7).abs() < 1e-15);
        let half = truncated_gaussian_mean(0.0, inf, 0.0, 1.0).unwrap();
        assert!((half - 0.797_884_560_802_865_4).abs() < 1e-15);
        assert!(truncated_gaussian_mean(-0.5, 0.5, 0.0, 3.0).unwrap().abs() < 1e-15);
        assert!(truncated_gaussian_mean(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(matches!(
            truncated_gaussian_mean(50.0, inf, 0.0, 1.0),
            Err(Error::Underflow { .. })
        ));
    }

    #[test]
    fn composite_integrates_polynomials_across_breaks() {
        let r = composite(-1.0, 2.0, &[0.0, 0.3, 5.0], |_| 0.4);
        let v = r.sum(|x| x * x * x - x);
        let exact = (16.0 / 4.0 - 4.0 / 2.0) - (1.0 / 4.0 - 1.0 / 2.0);
        assert!((v - exact).abs() < 1e-13);
        assert!(r.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn gaussian_composite_mass() {
        let r = WeightedRule::gaussian_composite(0.5, 2.0, &[1.0], |_| 0.3);
        assert!((r.sum(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((r.sum(|x| x) - 0.5).abs() < 1e-13);
        assert!((r.sum(|x| (x - 0.5) * (x - 0.5)) - 2.0).abs() < 1e-12);
    }
}
