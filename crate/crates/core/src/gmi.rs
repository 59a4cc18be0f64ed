//! Achievable rates of nearest-neighbor decoding under Gaussian codebooks.
//!
//! With a front end g, the decoder minimizes Σ (g(y_k) − a·x_k(m))² and
//! achieves the GMI −½ ln(1 − Δ_g), Δ_g = (E[x g(y)])² / (E_s·E[g(y)²]).
//! Linear front ends share Δ with the raw output; the conditional mean
//! attains the maximum Δ = Θ², the squared correlation ratio.

use crate::channels::{cell_probability, ChannelModel, InputSpec};
use crate::error::{invalid, Error, Result};
use crate::estimators::{mapping_moments, FrontEnd, MomentReport, OutputLaw, QuadConfig};
use crate::math::{exp, ln, log1p, sqrt};
use crate::quadrature::WeightedRule;

pub const LN_2: f64 = core::f64::consts::LN_2;
/// Δ at or above 1 − this is reported as an infinite rate.
pub const DEGENERATE_MARGIN: f64 = 1e-12;
/// Δ outside [0, 1] by at most this much is treated as roundoff.
pub const CLAMP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmiReport {
    pub delta: f64,
    pub gmi_nats: f64,
    pub gmi_bits: f64,
    pub effective_snr: f64,
    /// Optimal decoder scaling, when the front end is known.
    pub a_opt: Option<f64>,
    pub degenerate: bool,
}

/// Rates from Δ alone; `a_opt` is left empty.
pub fn gmi_from_delta(delta: f64) -> Result<GmiReport> {
    if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&delta) {
        return Err(invalid("delta", alloc::format!("{delta} outside [0, 1]")));
    }
    let delta = if delta > 1.0 {
        log::warn!("delta {delta} clamped to 1");
        1.0
    } else if delta < 0.0 {
        log::warn!("delta {delta} clamped to 0");
        0.0
    } else {
        delta
    };
    if delta >= 1.0 - DEGENERATE_MARGIN {
        return Ok(GmiReport {
            delta,
            gmi_nats: f64::INFINITY,
            gmi_bits: f64::INFINITY,
            effective_snr: f64::INFINITY,
            a_opt: None,
            degenerate: true,
        });
    }
    let gmi_nats = -0.5 * log1p(-delta);
    Ok(GmiReport {
        delta,
        gmi_nats,
        gmi_bits: gmi_nats / LN_2,
        effective_snr: delta / (1.0 - delta),
        a_opt: None,
        degenerate: false,
    })
}

/// Δ_g for the given front end, from the model moments.
pub fn delta_for_front_end(moments: &MomentReport, front_end: &FrontEnd) -> Result<f64> {
    if !(moments.output_power > 0.0) {
        return Err(Error::Degenerate("zero output power"));
    }
    Ok(match front_end {
        FrontEnd::Identity | FrontEnd::Scale(_) => {
            moments.cross_moment * moments.cross_moment / (moments.energy * moments.output_power)
        }
        FrontEnd::PosteriorMean(_) => moments.cond_mean_power / moments.energy,
    })
}

/// Δ_g for an arbitrary mapping g of the output.
pub fn delta_for_mapping<G: Fn(f64) -> f64>(
    channel: &ChannelModel,
    input: &InputSpec,
    g: G,
    quad: &QuadConfig,
) -> Result<f64> {
    let (xg, gg) = mapping_moments(channel, input, g, quad)?;
    if !(gg > 0.0) {
        return Err(Error::Degenerate("mapped output has zero power"));
    }
    Ok(xg * xg / (input.energy() * gg))
}

fn snr_from_error(energy: f64, error: f64) -> f64 {
    if error < 1e-12 * energy {
        f64::INFINITY
    } else {
        (energy - error) / error
    }
}

/// (E_s − mmse)/mmse
pub fn effective_snr_canonical(moments: &MomentReport) -> f64 {
    snr_from_error(moments.energy, moments.mmse)
}

/// (E_s − lmmse)/lmmse
pub fn effective_snr_linear(moments: &MomentReport) -> f64 {
    snr_from_error(moments.energy, moments.lmmse)
}

/// E[x·g(y)] and E[g(y)²] for the front end.
pub fn front_end_moments(moments: &MomentReport, front_end: &FrontEnd) -> (f64, f64) {
    match front_end {
        FrontEnd::Identity => (moments.cross_moment, moments.output_power),
        FrontEnd::Scale(c) => (c * moments.cross_moment, c * c * moments.output_power),
        // E[x E[x|y]] = E[(E[x|y])²]
        FrontEnd::PosteriorMean(_) => (moments.cond_mean_power, moments.cond_mean_power),
    }
}

/// a_opt = E[x·g(y)]/E_s.
pub fn optimal_scaling(moments: &MomentReport, front_end: &FrontEnd) -> f64 {
    front_end_moments(moments, front_end).0 / moments.energy
}

/// Full rate report for one front end.
pub fn gmi_report(moments: &MomentReport, front_end: &FrontEnd) -> Result<GmiReport> {
    let mut report = gmi_from_delta(delta_for_front_end(moments, front_end)?)?;
    report.a_opt = Some(optimal_scaling(moments, front_end));
    Ok(report)
}

/// J(θ) = ½ ln(1 − 2θa²E_s) + θ·distortion − θ·second_moment_g/(1 − 2θa²E_s),
/// per-symbol normalized, over θ < 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaObjective {
    pub energy: f64,
    pub a: f64,
    /// E[‖g(y)‖²]/L
    pub second_moment_g: f64,
    /// E[‖g(y) − a·x‖²]/L
    pub distortion: f64,
}

impl ThetaObjective {
    /// Objective for scaling `a` given E[x g]/L and E[g²]/L.
    pub fn from_moments(energy: f64, a: f64, cross_g: f64, second_moment_g: f64) -> Self {
        let distortion = second_moment_g - 2.0 * a * cross_g + a * a * energy;
        Self { energy, a, second_moment_g, distortion }
    }

    pub fn for_front_end(moments: &MomentReport, front_end: &FrontEnd, a: f64) -> Self {
        let (xg, gg) = front_end_moments(moments, front_end);
        Self::from_moments(moments.energy, a, xg, gg)
    }

    pub fn value(&self, theta: f64) -> f64 {
        let u = 1.0 - 2.0 * theta * self.a * self.a * self.energy;
        0.5 * ln(u) + theta * self.distortion - theta * self.second_moment_g / u
    }

    // θ as a function of u = 1 − 2θa²E_s = e^s, s > 0.
    fn theta_at(&self, s: f64) -> f64 {
        -crate::math::expm1(s) / (2.0 * self.a * self.a * self.energy)
    }
}

/// sup_{θ<0} J(θ) by golden-section search.
///
/// J is concave in u = 1 − 2θa²E_s, so it is unimodal in s = ln u on
/// (0, ∞). The bracket grows until J turns down; the maximizer can sit far
/// below −1/(2a²E_s) when Δ > 1/2.
pub fn gmi_via_theta_sup(obj: &ThetaObjective) -> Result<f64> {
    if !(obj.distortion > 0.0) {
        return Err(Error::Degenerate("zero decoding distortion: objective is unbounded"));
    }
    if obj.a == 0.0 || !obj.a.is_finite() {
        return Err(invalid("a", "scaling must be finite and nonzero"));
    }
    if !(obj.energy > 0.0) || !(obj.second_moment_g >= 0.0) {
        return Err(invalid("objective", "energy and second moment must be positive"));
    }
    let j = |s: f64| obj.value(obj.theta_at(s));
    let mut hi = 1.0;
    while j(hi) >= j(0.5 * hi) {
        hi *= 2.0;
        if hi > 700.0 {
            return Err(Error::Degenerate("θ-objective did not turn down: unbounded"));
        }
    }
    let inv_phi = 0.5 * (sqrt(5.0) - 1.0);
    let (mut lo, mut hi) = (0.0, hi);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (j(c), j(d));
    for _ in 0..300 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = j(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = j(d);
        }
    }
    let best = j(0.5 * (lo + hi)).max(fc).max(fd);
    if !best.is_finite() {
        return Err(Error::Degenerate("θ-objective is not finite at its maximizer"));
    }
    // θ → 0⁻ gives J → 0
    Ok(best.max(0.0))
}

/// Exact I(x; y) in nats for quantizer channels under x ~ N(0, E_s).
pub fn mutual_information_finite(channel: &ChannelModel, input: &InputSpec, quad: &QuadConfig) -> Result<f64> {
    channel.validate()?;
    let cells = channel
        .cells()
        .ok_or_else(|| invalid("channel", "mutual information needs a finite output alphabet"))?;
    let law = OutputLaw::build(channel, input, quad)?;
    let output_entropy = match &law {
        OutputLaw::Finite { probs, .. } => probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * ln(p)).sum::<f64>(),
        _ => unreachable!("quantizer channels have finite laws"),
    };
    let noise_var = channel.noise_var();
    if noise_var == 0.0 {
        return Ok(output_entropy);
    }
    let energy = input.energy();
    let bounds: alloc::vec::Vec<f64> = cells.iter().map(|c| c.upper).filter(|u| u.is_finite()).collect();
    let width = quad.panel_fraction() * sqrt(noise_var).min(sqrt(energy));
    let rule = WeightedRule::gaussian_composite(0.0, energy, &bounds, |_| width);
    let conditional_entropy = rule.sum(|x| {
        cells
            .iter()
            .map(|c| cell_probability(c, x, noise_var))
            .filter(|&p| p > 0.0)
            .map(|p| -p * ln(p))
            .sum()
    });
    Ok((output_entropy - conditional_entropy).max(0.0))
}

/// Lower bound E_s·e^{−2I} that the MMSE must respect.
pub fn mmse_floor(energy: f64, mutual_information: f64) -> f64 {
    energy * exp(-2.0 * mutual_information)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::compute_moments;
    use core::f64::consts::PI;

    #[test]
    fn delta_examples() {
        assert_eq!(gmi_from_delta(0.0).unwrap().gmi_nats, 0.0);
        assert!((gmi_from_delta(0.5).unwrap().gmi_nats - 0.5 * 2f64.ln()).abs() < 1e-15);
        let r = gmi_from_delta(2.0 / PI).unwrap();
        assert!((r.gmi_nats - (-0.5 * (1.0 - 2.0 / PI).ln())).abs() < 1e-15);
        assert!((r.gmi_nats - 0.506_152_767).abs() < 1e-9);
    }

    #[test]
    fn delta_clamping() {
        let r = gmi_from_delta(1.0 + 5e-10).unwrap();
        assert!(r.degenerate && r.gmi_nats.is_infinite() && r.effective_snr.is_infinite());
        assert_eq!(gmi_from_delta(-5e-10).unwrap().gmi_nats, 0.0);
        assert!(gmi_from_delta(1.0 + 1e-8).is_err());
        assert!(gmi_from_delta(-1e-8).is_err());
        assert!(gmi_from_delta(f64::NAN).is_err());
        assert!(gmi_from_delta(1.0 - 1e-13).unwrap().degenerate);
        assert!(!gmi_from_delta(1.0 - 1e-11).unwrap().degenerate);
    }

    #[test]
    fn theta_sup_requires_distortion() {
        let obj = ThetaObjective { energy: 1.0, a: 1.0, second_moment_g: 1.0, distortion: 0.0 };
        assert!(gmi_via_theta_sup(&obj).is_err());
        let obj = ThetaObjective { energy: 1.0, a: 0.0, second_moment_g: 1.0, distortion: 1.0 };
        assert!(gmi_via_theta_sup(&obj).is_err());
    }

    #[test]
    fn theta_sup_awgn() {
        let ch = ChannelModel::Awgn { noise_var: 1.0 };
        let m = compute_moments(&ch, &InputSpec::new(1.0).unwrap(), &QuadConfig::default()).unwrap();
        let a = optimal_scaling(&m, &FrontEnd::Identity);
        assert!((a - 1.0).abs() < 1e-12);
        let obj = ThetaObjective::for_front_end(&m, &FrontEnd::Identity, a);
        let v = gmi_via_theta_sup(&obj).unwrap();
        assert!((v - 0.346_573_6).abs() < 1e-6);
        let half = gmi_via_theta_sup(&ThetaObjective::for_front_end(&m, &FrontEnd::Identity, 0.5 * a)).unwrap();
        assert!(half < v);
    }

    #[test]
    fn wrong_sign_scaling_gives_zero() {
        let obj = ThetaObjective::from_moments(1.0, -1.0, 1.0, 2.0);
        assert!(gmi_via_theta_sup(&obj).unwrap().abs() < 1e-9);
    }
}
