mod common;

use std::f64::consts::{LN_2, PI};

use common::{corpus, finite_corpus, input, rel_close};
use gmi_core::estimators::posterior_mean_front_end;
use gmi_core::gmi::{
    delta_for_front_end, effective_snr_canonical, effective_snr_linear, gmi_from_delta, gmi_report, gmi_via_theta_sup,
    mmse_floor, mutual_information_finite, optimal_scaling, ThetaObjective,
};
use gmi_core::{compute_moments, ChannelModel, Error, FrontEnd, Nonlinearity, QuadConfig};
use proptest::prelude::*;

fn q() -> QuadConfig {
    QuadConfig::default()
}

#[test]
fn delta_examples() {
    assert_eq!(gmi_from_delta(0.0).unwrap().gmi_nats, 0.0);
    assert!((gmi_from_delta(0.5).unwrap().gmi_nats - 0.5 * LN_2).abs() < 1e-15);
    let r = gmi_from_delta(2.0 / PI).unwrap();
    assert!((r.gmi_nats + 0.5 * (1.0 - 2.0 / PI).ln()).abs() < 1e-15);
    assert!((r.gmi_bits - r.gmi_nats / LN_2).abs() < 1e-15);
    assert!(r.a_opt.is_none());
}

#[test]
fn delta_range_policy() {
    assert!(matches!(gmi_from_delta(-2e-9), Err(Error::InvalidParameter { .. })));
    assert!(matches!(gmi_from_delta(1.0 + 2e-9), Err(Error::InvalidParameter { .. })));
    assert_eq!(gmi_from_delta(-1e-10).unwrap().delta, 0.0);
    let top = gmi_from_delta(1.0).unwrap();
    assert!(top.degenerate && top.gmi_nats == f64::INFINITY && top.effective_snr == f64::INFINITY);
    assert!(!gmi_from_delta(1.0 - 1e-11).unwrap().degenerate);
}

#[test]
fn delta_for_front_end_examples() {
    let awgn = compute_moments(&ChannelModel::Awgn { noise_var: 1.0 }, &input(1.0), &q()).unwrap();
    assert!((delta_for_front_end(&awgn, &FrontEnd::Identity).unwrap() - 0.5).abs() < 1e-12);
    let sign = compute_moments(&ChannelModel::SignQuantizer { noise_var: 0.0 }, &input(1.0), &q()).unwrap();
    assert!((delta_for_front_end(&sign, &FrontEnd::Identity).unwrap() - 2.0 / PI).abs() < 1e-12);
    for ch in corpus(0.3) {
        let m = compute_moments(&ch, &input(1.0), &q()).unwrap();
        let id = delta_for_front_end(&m, &FrontEnd::Identity).unwrap();
        for c in [-3.0, 0.01, 7.5] {
            assert!((delta_for_front_end(&m, &FrontEnd::Scale(c)).unwrap() - id).abs() < 1e-15);
        }
    }
}

#[test]
fn effective_snr_examples() {
    for s in [0.1, 1.0, 10.0] {
        let m = compute_moments(&ChannelModel::Awgn { noise_var: s }, &input(1.0), &q()).unwrap();
        assert!(rel_close(effective_snr_canonical(&m), 1.0 / s, 1e-9));
        assert!(rel_close(effective_snr_linear(&m), 1.0 / s, 1e-9));
    }
    let sign = compute_moments(&ChannelModel::SignQuantizer { noise_var: 0.0 }, &input(1.0), &q()).unwrap();
    let want = 2.0 / (PI - 2.0);
    assert!(rel_close(effective_snr_canonical(&sign), want, 1e-12));
    assert!(rel_close(effective_snr_linear(&sign), want, 1e-12));

    let q3 = ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var: 0.1 };
    let m = compute_moments(&q3, &input(1.0), &q()).unwrap();
    assert!(effective_snr_canonical(&m) - effective_snr_linear(&m) > 1e-6);

    let cubic = ChannelModel::DeterministicNonlinearity { shape: Nonlinearity::Cubic, noise_var: 0.0 };
    let m = compute_moments(&cubic, &input(1.0), &q()).unwrap();
    assert_eq!(effective_snr_canonical(&m), f64::INFINITY);
}

#[test]
fn optimal_scaling_examples() {
    let (e, s) = (2.0, 0.5);
    let ch = ChannelModel::Awgn { noise_var: s };
    let m = compute_moments(&ch, &input(e), &q()).unwrap();
    assert!((optimal_scaling(&m, &FrontEnd::Identity) - 1.0).abs() < 1e-12);
    let pm = posterior_mean_front_end(&ch, &input(e), &q()).unwrap();
    assert!((optimal_scaling(&m, &pm) - e / (e + s)).abs() < 1e-10);
    let sign = compute_moments(&ChannelModel::SignQuantizer { noise_var: 0.0 }, &input(1.0), &q()).unwrap();
    assert!((optimal_scaling(&sign, &FrontEnd::Identity) - (2.0 / PI).sqrt()).abs() < 1e-12);
}

#[test]
fn theta_sup_examples() {
    let awgn = compute_moments(&ChannelModel::Awgn { noise_var: 1.0 }, &input(1.0), &q()).unwrap();
    let a = optimal_scaling(&awgn, &FrontEnd::Identity);
    let v = gmi_via_theta_sup(&ThetaObjective::for_front_end(&awgn, &FrontEnd::Identity, a)).unwrap();
    assert!((v - 0.5 * LN_2).abs() < 1e-6);

    let sign = compute_moments(&ChannelModel::SignQuantizer { noise_var: 0.0 }, &input(1.0), &q()).unwrap();
    let a = optimal_scaling(&sign, &FrontEnd::Identity);
    let best = gmi_via_theta_sup(&ThetaObjective::for_front_end(&sign, &FrontEnd::Identity, a)).unwrap();
    assert!((best + 0.5 * (1.0 - 2.0 / PI).ln()).abs() < 1e-6);
    let half = gmi_via_theta_sup(&ThetaObjective::for_front_end(&sign, &FrontEnd::Identity, 0.5 * a)).unwrap();
    assert!(half < best - 1e-6);
}

#[test]
fn theta_sup_rejects_bad_objectives() {
    let zero_a = ThetaObjective::from_moments(1.0, 0.0, 0.5, 1.0);
    assert!(gmi_via_theta_sup(&zero_a).is_err());
    let no_distortion = ThetaObjective { energy: 1.0, a: 1.0, second_moment_g: 1.0, distortion: 0.0 };
    assert!(gmi_via_theta_sup(&no_distortion).is_err());
}

#[test]
fn theta_sup_matches_closed_form_over_corpus() {
    for s in [0.05, 0.3, 1.0, 4.0] {
        for ch in corpus(s) {
            let m = compute_moments(&ch, &input(1.0), &q()).unwrap();
            let pm = posterior_mean_front_end(&ch, &input(1.0), &q()).unwrap();
            for fe in [FrontEnd::Identity, FrontEnd::Scale(-2.0), pm] {
                let r = gmi_report(&m, &fe).unwrap();
                let sup = gmi_via_theta_sup(&ThetaObjective::for_front_end(&m, &fe, r.a_opt.unwrap())).unwrap();
                assert!((sup - r.gmi_nats).abs() <= 1e-6, "{ch:?} {}: {sup} vs {}", fe.name(), r.gmi_nats);
            }
        }
    }
}

#[test]
fn canonical_front_end_dominates() {
    for e in [0.25, 1.0, 4.0] {
        for s in [0.05, 0.5, 2.0] {
            for ch in corpus(s) {
                let m = compute_moments(&ch, &input(e), &q()).unwrap();
                let pm = posterior_mean_front_end(&ch, &input(e), &q()).unwrap();
                let can = gmi_report(&m, &pm).unwrap().gmi_nats;
                let lin = gmi_report(&m, &FrontEnd::Identity).unwrap().gmi_nats;
                let scaled = gmi_report(&m, &FrontEnd::Scale(0.3)).unwrap().gmi_nats;
                assert!(can >= lin - 1e-9, "{ch:?} E={e}: {can} < {lin}");
                assert!((lin - scaled).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn awgn_restoration() {
    for s in [0.1, 1.0, 10.0] {
        let ch = ChannelModel::Awgn { noise_var: s };
        let m = compute_moments(&ch, &input(1.0), &q()).unwrap();
        let pm = posterior_mean_front_end(&ch, &input(1.0), &q()).unwrap();
        let want = 0.5 * (1.0 + 1.0 / s).ln();
        assert!(rel_close(gmi_report(&m, &FrontEnd::Identity).unwrap().gmi_nats, want, 1e-9));
        assert!(rel_close(gmi_report(&m, &pm).unwrap().gmi_nats, want, 1e-9));
    }
}

#[test]
fn mutual_information_examples() {
    let sign = ChannelModel::SignQuantizer { noise_var: 0.0 };
    let i = mutual_information_finite(&sign, &input(1.0), &q()).unwrap();
    assert!((i - LN_2).abs() < 1e-15);
    let m = compute_moments(&sign, &input(1.0), &q()).unwrap();
    assert!(i >= gmi_report(&m, &FrontEnd::Identity).unwrap().gmi_nats);

    let drowned = ChannelModel::SignQuantizer { noise_var: 1e14 };
    assert!(mutual_information_finite(&drowned, &input(1.0), &q()).unwrap() < 1e-12);

    assert!(mutual_information_finite(&ChannelModel::Awgn { noise_var: 1.0 }, &input(1.0), &q()).is_err());
}

// I(x;y) for a noisy sign quantizer by brute-force Simpson over x.
fn sign_mi_oracle(e: f64, s: f64) -> f64 {
    let h2 = |p: f64| if p <= 0.0 || p >= 1.0 { 0.0 } else { -p * p.ln() - (1.0 - p) * (1.0 - p).ln() };
    let sd = e.sqrt();
    let (lo, hi, n) = (-12.0 * sd, 12.0 * sd, 100_000);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let x = lo + k as f64 * h;
        let c = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let p = 0.5 * libm::erfc(-x / (2.0 * s).sqrt());
        acc += c * h2(p) * (-x * x / (2.0 * e)).exp() / (2.0 * PI * e).sqrt();
    }
    LN_2 - acc * h / 3.0
}

#[test]
fn mutual_information_matches_simpson() {
    for (e, s) in [(1.0, 1.0), (4.0, 0.25), (0.5, 2.0)] {
        let got = mutual_information_finite(&ChannelModel::SignQuantizer { noise_var: s }, &input(e), &q()).unwrap();
        let want = sign_mi_oracle(e, s);
        assert!((got - want).abs() < 1e-10, "E={e} s={s}: {got} vs {want}");
    }
}

#[test]
fn information_sandwich() {
    for e in [0.25, 1.0, 4.0] {
        for s in [0.0, 0.05, 0.5, 2.0] {
            for ch in finite_corpus(s) {
                let i = mutual_information_finite(&ch, &input(e), &q()).unwrap();
                let m = compute_moments(&ch, &input(e), &q()).unwrap();
                let pm = posterior_mean_front_end(&ch, &input(e), &q()).unwrap();
                let g = gmi_report(&m, &pm).unwrap().gmi_nats;
                assert!(g <= i + 1e-9, "{ch:?} E={e}: GMI {g} > I {i}");
                assert!(m.mmse >= mmse_floor(e, i) - 1e-9, "{ch:?} E={e}");
            }
        }
    }
}

proptest! {
    #[test]
    fn rate_identities(delta in 0.0f64..0.999_999) {
        let r = gmi_from_delta(delta).unwrap();
        prop_assert!((r.gmi_nats - 0.5 * r.effective_snr.ln_1p()).abs() < 1e-12);
        prop_assert!((r.gmi_nats + 0.5 * (1.0 - delta).ln()).abs() < 1e-12);
        prop_assert!((r.gmi_nats / r.gmi_bits - LN_2).abs() < 1e-12);
        prop_assert!(!r.degenerate);
    }

    #[test]
    fn theta_sup_for_arbitrary_moments(energy in 0.1f64..10.0, rho in 0.01f64..0.995, power in 0.1f64..10.0) {
        // Any (E[xg], E[g²]) pair with correlation rho.
        let cross = rho * (energy * power).sqrt();
        let delta = rho * rho;
        let a = cross / energy;
        let sup = gmi_via_theta_sup(&ThetaObjective::from_moments(energy, a, cross, power)).unwrap();
        prop_assert!((sup + 0.5 * (1.0 - delta).ln()).abs() < 1e-6);
    }

    #[test]
    fn off_optimal_scaling_loses(energy in 0.1f64..10.0, rho in 0.05f64..0.99, factor in 0.2f64..3.0) {
        prop_assume!((factor - 1.0).abs() > 0.05);
        let cross = rho * energy.sqrt();
        let a = cross / energy;
        let best = gmi_via_theta_sup(&ThetaObjective::from_moments(energy, a, cross, 1.0)).unwrap();
        let other = gmi_via_theta_sup(&ThetaObjective::from_moments(energy, factor * a, cross, 1.0)).unwrap();
        prop_assert!(other < best);
    }
}
