mod common;

use std::f64::consts::PI;

use common::{corpus, input, rel_close};
use gmi_core::estimators::{bussgang_residual_check, mapping_moments, posterior_mean_front_end};
use gmi_core::gmi::delta_for_mapping;
use gmi_core::{compute_moments, ChannelModel, FrontEnd, Nonlinearity, QuadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q() -> QuadConfig {
    QuadConfig::default()
}

fn npdf(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn ncdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

// Φ(b) − Φ(a) without cancellation in either tail.
fn interval(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        ncdf(-a) - ncdf(-b)
    } else {
        ncdf(b) - ncdf(a)
    }
}

// Clip + noise: p(y) and ∫x p(y|x) φ_E(x) dx from Gaussian convolution pieces.
fn clip_pieces(y: f64, a: f64, e: f64, s: f64) -> (f64, f64) {
    let tail = ncdf(-a / e.sqrt());
    let mu = y * e / (e + s);
    let v = e * s / (e + s);
    let sv = v.sqrt();
    let inside = interval((-a - mu) / sv, (a - mu) / sv);
    let inside_first = mu * inside + v * (npdf(-a - mu, v) - npdf(a - mu, v));
    let py = tail * (npdf(y - a, s) + npdf(y + a, s)) + npdf(y, e + s) * inside;
    let tail_first = e * npdf(a, e);
    let n1 = tail_first * (npdf(y - a, s) - npdf(y + a, s)) + npdf(y, e + s) * inside_first;
    (py, n1)
}

fn clip_cond_mean_power(a: f64, e: f64, s: f64) -> f64 {
    let (lo, hi, n) = (-a - 14.0 * s.sqrt() - 0.1, a + 14.0 * s.sqrt() + 0.1, 200_000);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let y = lo + i as f64 * h;
        let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let (py, n1) = clip_pieces(y, a, e, s);
        if py > 0.0 {
            acc += c * n1 * n1 / py;
        }
    }
    acc * h / 3.0
}

#[test]
fn awgn_closed_form() {
    for (e, s) in [(1.0, 1.0), (4.0, 0.1), (0.25, 10.0)] {
        let m = compute_moments(&ChannelModel::Awgn { noise_var: s }, &input(e), &q()).unwrap();
        assert!(rel_close(m.cross_moment, e, 1e-12));
        assert!(rel_close(m.output_power, e + s, 1e-12));
        assert!(rel_close(m.lmmse, e * s / (e + s), 1e-10));
        assert!(rel_close(m.mmse, e * s / (e + s), 1e-10));
        assert!(rel_close(m.bussgang_coeff, 1.0, 1e-12));
    }
}

#[test]
fn sign_quantizer_closed_form() {
    let m = compute_moments(&ChannelModel::SignQuantizer { noise_var: 0.0 }, &input(1.0), &q()).unwrap();
    assert!((m.cross_moment - (2.0 / PI).sqrt()).abs() < 1e-12);
    assert!((m.output_power - 1.0).abs() < 1e-15);
    assert!((m.mmse - (1.0 - 2.0 / PI)).abs() < 1e-12);
    assert!((m.lmmse - (1.0 - 2.0 / PI)).abs() < 1e-12);
}

#[test]
fn abs_kills_both_statistics() {
    let ch = ChannelModel::DeterministicNonlinearity { shape: Nonlinearity::Abs, noise_var: 0.0 };
    let m = compute_moments(&ch, &input(1.0), &q()).unwrap();
    assert!(m.cross_moment.abs() < 1e-14);
    assert!(m.cond_mean_power.abs() < 1e-14);
    assert!(m.correlation_ratio.abs() < 1e-7);
    let noisy = ChannelModel::DeterministicNonlinearity { shape: Nonlinearity::Abs, noise_var: 0.3 };
    let m = compute_moments(&noisy, &input(2.0), &q()).unwrap();
    assert!(m.cross_moment.abs() < 1e-12 && m.cond_mean_power.abs() < 1e-12);
}

#[test]
fn clip_plus_noise_matches_convolution_oracle() {
    for (a, e, s) in [(1.0, 1.0, 0.1), (0.5, 2.0, 0.5), (1.5, 1.0, 1.0), (1.0, 4.0, 0.25)] {
        let ch = ChannelModel::HardClip { clip_level: a, noise_var: s };
        let m = compute_moments(&ch, &input(e), &q()).unwrap();
        let want = clip_cond_mean_power(a, e, s);
        assert!(rel_close(m.cond_mean_power, want, 1e-9), "A={a} E={e} s={s}: {} vs {want}", m.cond_mean_power);

        let g = posterior_mean_front_end(&ch, &input(e), &q()).unwrap();
        for y in [-3.0, -1.0, -0.2, 0.0, 0.7, 2.5] {
            let (py, n1) = clip_pieces(y, a, e, s);
            assert!((g.apply(y) - n1 / py).abs() < 1e-10, "y={y}: {} vs {}", g.apply(y), n1 / py);
        }
    }
}

#[test]
fn bussgang_gain_of_clipper_is_erf() {
    for e in [0.25f64, 1.0, 4.0] {
        for a in [0.3, 1.0, 2.0] {
            let m = compute_moments(&ChannelModel::HardClip { clip_level: a, noise_var: 0.0 }, &input(e), &q()).unwrap();
            let want = libm::erf(a / (2.0 * e).sqrt());
            assert!(rel_close(m.bussgang_coeff, want, 1e-9), "A={a} E={e}");
        }
    }
}

#[test]
fn report_identities_hold_over_corpus() {
    for e in [0.25, 1.0, 4.0] {
        for s in [0.0, 0.1, 1.0] {
            for ch in corpus(s) {
                if s == 0.0 && matches!(ch, ChannelModel::Awgn { .. }) {
                    continue;
                }
                let m = compute_moments(&ch, &input(e), &q()).unwrap();
                let tag = format!("{ch:?} E={e}");
                assert!(m.mmse <= m.lmmse + 1e-9 * e, "{tag}: mmse {} lmmse {}", m.mmse, m.lmmse);
                assert!(m.lmmse <= e * (1.0 + 1e-12), "{tag}");
                assert!(m.mmse >= -1e-12, "{tag}");
                assert!((m.mmse - (e - m.cond_mean_power)).abs() <= 1e-12 * e, "{tag}");
                assert!((m.lmmse - (e - m.cross_moment.powi(2) / m.output_power)).abs() <= 1e-12 * e, "{tag}");
                assert!((m.correlation_ratio.powi(2) - m.cond_mean_power / e).abs() <= 1e-12, "{tag}");
                assert!((0.0..=1.0).contains(&m.correlation_ratio), "{tag}");
            }
        }
    }
}

#[test]
fn order_doubling_is_stable() {
    let coarse = QuadConfig { check_convergence: false, ..q() };
    for ch in corpus(0.2) {
        let a = compute_moments(&ch, &input(1.0), &coarse).unwrap();
        let b = compute_moments(&ch, &input(1.0), &coarse.doubled()).unwrap();
        for (x, y) in [(a.cross_moment, b.cross_moment), (a.output_power, b.output_power), (a.mmse, b.mmse)] {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{ch:?}: {x} vs {y}");
        }
    }
}

#[test]
fn invertible_noiseless_maps_have_unit_correlation_ratio() {
    for shape in [Nonlinearity::Identity, Nonlinearity::Cubic, Nonlinearity::Tanh { gain: 2.0 }] {
        let ch = ChannelModel::DeterministicNonlinearity { shape, noise_var: 0.0 };
        let m = compute_moments(&ch, &input(1.5), &q()).unwrap();
        assert_eq!(m.correlation_ratio, 1.0, "{shape:?}");
        assert!(m.mmse.abs() < 1e-12);
    }
    let clipped = compute_moments(&ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.0 }, &input(1.0), &q()).unwrap();
    assert!(clipped.correlation_ratio < 1.0 - 1e-3);
}

#[test]
fn posterior_mean_examples() {
    let (e, s) = (2.0, 0.5);
    let g = posterior_mean_front_end(&ChannelModel::Awgn { noise_var: s }, &input(e), &q()).unwrap();
    for y in [-4.0, -0.3, 0.0, 1.0, 6.0] {
        assert!((g.apply(y) - e / (e + s) * y).abs() < 1e-10, "y={y}");
    }
    let sign = posterior_mean_front_end(&ChannelModel::SignQuantizer { noise_var: 0.0 }, &input(1.0), &q()).unwrap();
    assert!((sign.apply(1.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
    assert!((sign.apply(-1.0) + (2.0 / PI).sqrt()).abs() < 1e-15);
    let abs = ChannelModel::DeterministicNonlinearity { shape: Nonlinearity::Abs, noise_var: 0.0 };
    let g = posterior_mean_front_end(&abs, &input(1.0), &q()).unwrap();
    for y in [0.0, 0.5, 3.0] {
        assert_eq!(g.apply(y), 0.0);
    }
    assert_eq!(g.name(), "canonical");
}

#[test]
fn quantizer_table_is_scaled_truncated_mean() {
    let (e, s) = (1.0, 0.1);
    let ch = ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var: s };
    let g = posterior_mean_front_end(&ch, &input(e), &q()).unwrap();
    for cell in ch.cells().unwrap() {
        let v = gmi_core::quadrature::truncated_gaussian_mean(cell.lower, cell.upper, 0.0, e + s).unwrap();
        assert!((g.apply(cell.level) - e / (e + s) * v).abs() < 1e-14);
    }
}

#[test]
fn residual_is_uncorrelated() {
    let cases = [
        ChannelModel::Awgn { noise_var: 0.5 },
        ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.1 },
        ChannelModel::SignQuantizer { noise_var: 0.0 },
        ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var: 0.1 },
        ChannelModel::DeterministicNonlinearity { shape: Nonlinearity::Cubic, noise_var: 0.2 },
    ];
    for ch in cases {
        let r = bussgang_residual_check(&ch, &input(1.0), &q()).unwrap();
        assert!(r.abs() < 1e-9, "{ch:?}: {r}");
    }
}

#[test]
fn mapping_moments_of_identity_match_report() {
    for ch in corpus(0.3) {
        let m = compute_moments(&ch, &input(1.0), &q()).unwrap();
        let (xg, gg) = mapping_moments(&ch, &input(1.0), |y| y, &q()).unwrap();
        assert!((xg - m.cross_moment).abs() < 1e-9 * m.cross_moment.abs().max(1.0), "{ch:?}");
        assert!((gg - m.output_power).abs() < 1e-9 * m.output_power, "{ch:?}");
    }
}

// Bounded perturbation b(y) = Σ c_k sin(ω_k y + φ_k) + d·tanh(y), |b| ≤ 1.
fn random_bounded(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let terms: Vec<(f64, f64, f64)> =
        (0..3).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.1..6.0), rng.random_range(0.0..2.0 * PI))).collect();
    let d: f64 = rng.random_range(-1.0..1.0);
    let norm = terms.iter().map(|t| t.0.abs()).sum::<f64>() + d.abs();
    move |y: f64| (terms.iter().map(|&(c, w, p)| c * (w * y + p).sin()).sum::<f64>() + d * y.tanh()) / norm
}

#[test]
fn posterior_mean_maximizes_delta() {
    let channels = [
        ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.25 },
        ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var: 0.1 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for ch in channels {
        let inp = input(1.0);
        let m = compute_moments(&ch, &inp, &q()).unwrap();
        let theta2 = m.cond_mean_power / m.energy;
        let g = posterior_mean_front_end(&ch, &inp, &q()).unwrap();
        for _ in 0..100 {
            let b = random_bounded(&mut rng);
            let eps: f64 = rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-4.0..0.0));
            let d = delta_for_mapping(&ch, &inp, |y| g.apply(y) + eps * b(y), &q()).unwrap();
            assert!(d <= theta2 + 1e-9, "{ch:?} eps {eps}: {d} > {theta2}");
        }
    }
}

#[test]
fn front_end_names() {
    assert_eq!(FrontEnd::Identity.name(), "identity");
    assert_eq!(FrontEnd::Scale(2.0).apply(1.5), 3.0);
}
