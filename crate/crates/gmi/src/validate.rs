//! Built-in invariant suite behind `gmi validate`.

use std::f64::consts::PI;

use gmi_core::blockmem::{block_gmi, BlockLinearChannel};
use gmi_core::channels::bussgang_stationarity_check;
use gmi_core::estimators::{bussgang_residual_check, posterior_mean_front_end};
use gmi_core::gmi::{delta_for_mapping, gmi_report, gmi_via_theta_sup, mmse_floor, mutual_information_finite, ThetaObjective};
use gmi_core::{compute_moments, ChannelModel, Error, FrontEnd, InputSpec, Nonlinearity, ProcessSpec, QuadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::describe;
use crate::{fmt_num, Table};

pub const VALIDATE_COLUMNS: [&str; 6] = ["check", "case", "measured", "relation", "bound", "pass"];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub case: String,
    pub measured: f64,
    /// Pass when `measured <= bound`; when false, pass when `measured > bound`.
    pub at_most: bool,
    pub bound: f64,
}

impl Check {
    fn at_most(name: &'static str, case: String, measured: f64, bound: f64) -> Self {
        Self { name, case, measured, at_most: true, bound }
    }

    pub fn pass(&self) -> bool {
        if self.at_most {
            self.measured <= self.bound
        } else {
            self.measured > self.bound
        }
    }
}

pub fn to_table(checks: &[Check]) -> Table {
    let mut t = Table::new(&VALIDATE_COLUMNS);
    for c in checks {
        t.push(vec![
            c.name.to_string(),
            c.case.clone(),
            fmt_num(c.measured),
            if c.at_most { "<=" } else { ">" }.to_string(),
            fmt_num(c.bound),
            c.pass().to_string(),
        ]);
    }
    t
}

/// Analog and quantized channels used for the per-channel checks.
pub fn default_corpus(noise_var: f64) -> Vec<ChannelModel> {
    vec![
        ChannelModel::Awgn { noise_var },
        ChannelModel::HardClip { clip_level: 1.0, noise_var },
        ChannelModel::SignQuantizer { noise_var },
        ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var },
        ChannelModel::DeterministicNonlinearity { shape: Nonlinearity::SoftLimiter { level: 1.0 }, noise_var },
        ChannelModel::DeterministicNonlinearity { shape: Nonlinearity::Tanh { gain: 1.5 }, noise_var },
    ]
}

pub fn finite_corpus(noise_var: f64) -> Vec<ChannelModel> {
    vec![
        ChannelModel::SignQuantizer { noise_var },
        ChannelModel::UniformQuantizer { bits: 2, step: 0.8, noise_var },
        ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var },
        ChannelModel::UniformQuantizer { bits: 5, step: 0.1, noise_var },
    ]
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

/// Canonical and linear GMI for one channel.
pub fn gmi_pair(ch: &ChannelModel, input: &InputSpec, quad: &QuadConfig) -> Result<(f64, f64), Error> {
    let m = compute_moments(ch, input, quad)?;
    let pm = posterior_mean_front_end(ch, input, quad)?;
    Ok((gmi_report(&m, &pm)?.gmi_nats, gmi_report(&m, &FrontEnd::Identity)?.gmi_nats))
}

/// Largest |θ-sup − closed form| over the identity and canonical front ends.
pub fn theta_sup_gap(ch: &ChannelModel, input: &InputSpec, quad: &QuadConfig) -> Result<f64, Error> {
    let m = compute_moments(ch, input, quad)?;
    let mut worst: f64 = 0.0;
    for fe in [FrontEnd::Identity, posterior_mean_front_end(ch, input, quad)?] {
        let r = gmi_report(&m, &fe)?;
        let a = r.a_opt.unwrap_or(0.0);
        let sup = gmi_via_theta_sup(&ThetaObjective::for_front_end(&m, &fe, a))?;
        worst = worst.max((sup - r.gmi_nats).abs());
    }
    Ok(worst)
}

/// b(y) = (Σ c_k sin(ω_k y + φ_k) + d·tanh y)/norm with |b| ≤ 1.
pub fn random_bounded<R: Rng>(rng: &mut R) -> impl Fn(f64) -> f64 {
    let terms: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.1..6.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let d: f64 = rng.random_range(-1.0..1.0);
    let norm = terms.iter().map(|t| t.0.abs()).sum::<f64>() + d.abs();
    move |y: f64| (terms.iter().map(|&(c, w, p)| c * (w * y + p).sin()).sum::<f64>() + d * y.tanh()) / norm
}

/// Largest Δ(g_mmse + ε·b) − Θ² over `count` random bounded perturbations.
pub fn perturbation_excess<R: Rng>(
    ch: &ChannelModel,
    input: &InputSpec,
    quad: &QuadConfig,
    count: usize,
    rng: &mut R,
) -> Result<f64, Error> {
    let m = compute_moments(ch, input, quad)?;
    let theta2 = m.cond_mean_power / m.energy;
    let g = posterior_mean_front_end(ch, input, quad)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let b = random_bounded(rng);
        let eps: f64 = rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-4.0..0.0));
        let d = delta_for_mapping(ch, input, |y| g.apply(y) + eps * b(y), quad)?;
        worst = worst.max(d - theta2);
    }
    Ok(worst)
}

/// Runs every check at E_s = 1, plus the per-channel checks on `extra`.
pub fn run_suite(extra: Option<&ChannelModel>, quad: &QuadConfig, seed: u64) -> Result<Vec<Check>, Error> {
    let input = InputSpec::new(1.0)?;
    let mut out = Vec::new();

    for s in [0.1, 1.0, 10.0] {
        let (can, lin) = gmi_pair(&ChannelModel::Awgn { noise_var: s }, &input, quad)?;
        let want = 0.5 * (1.0 + 1.0 / s).ln();
        out.push(Check::at_most("awgn_restoration", format!("noise_var={s}"), rel(lin, want).max(rel(can, want)), 1e-9));
    }

    let sign = ChannelModel::SignQuantizer { noise_var: 0.0 };
    let m = compute_moments(&sign, &input, quad)?;
    let (can, _) = gmi_pair(&sign, &input, quad)?;
    let two_pi = 2.0 / PI;
    for (what, got, want) in [
        ("delta", m.cond_mean_power, two_pi),
        ("gmi_nats", can, -0.5 * (1.0 - two_pi).ln()),
        ("mmse", m.mmse, 1.0 - two_pi),
        ("lmmse", m.lmmse, 1.0 - two_pi),
    ] {
        out.push(Check::at_most("sign_closed_form", what.to_string(), (got - want).abs(), 1e-9));
    }

    let dominance = [
        ChannelModel::HardClip { clip_level: 1.0, noise_var: 1.0 },
        ChannelModel::SignQuantizer { noise_var: 1.0 },
        ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var: 1.0 },
        ChannelModel::DeterministicNonlinearity { shape: Nonlinearity::SoftLimiter { level: 1.0 }, noise_var: 1.0 },
    ];
    for snr in [0.25, 1.0, 4.0, 16.0] {
        for base in &dominance {
            let ch = base.with_noise_var(1.0 / snr);
            let (can, lin) = gmi_pair(&ch, &input, quad)?;
            out.push(Check::at_most("canonical_dominance", describe(&ch), lin - can, 1e-9));
            if matches!(ch, ChannelModel::UniformQuantizer { .. }) {
                out.push(Check { name: "canonical_gap", case: describe(&ch), measured: can - lin, at_most: false, bound: 1e-6 });
            }
        }
    }
    if let Some(ch) = extra {
        let (can, lin) = gmi_pair(ch, &input, quad)?;
        out.push(Check::at_most("canonical_dominance", describe(ch), lin - can, 1e-9));
    }

    let mut finite = finite_corpus(0.0);
    finite.extend(finite_corpus(0.5));
    if let Some(ch) = extra.filter(|c| c.cells().is_some()) {
        finite.push(ch.clone());
    }
    for ch in &finite {
        let i = mutual_information_finite(ch, &input, quad)?;
        let (can, _) = gmi_pair(ch, &input, quad)?;
        let mmse = compute_moments(ch, &input, quad)?.mmse;
        out.push(Check::at_most("gmi_below_mutual_information", describe(ch), can - i, 1e-9));
        out.push(Check::at_most("mmse_above_information_floor", describe(ch), mmse_floor(1.0, i) - mmse, 1e-9));
    }

    let mut analog = default_corpus(0.3);
    analog.extend(extra.cloned());
    for ch in &analog {
        out.push(Check::at_most("theta_sup_equivalence", describe(ch), theta_sup_gap(ch, &input, quad)?, 1e-6));
        out.push(Check::at_most("bussgang_residual", describe(ch), bussgang_residual_check(ch, &input, quad)?.abs(), 1e-9));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for ch in [
        ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.25 },
        ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var: 0.1 },
    ] {
        let excess = perturbation_excess(&ch, &input, quad, 20, &mut rng)?;
        out.push(Check::at_most("posterior_mean_maximizes_delta", describe(&ch), excess, 1e-9));
    }

    let r = block_gmi(&BlockLinearChannel::new(vec![1.0, 0.5], 1.0, 64, 1.0)?)?;
    out.push(Check::at_most("block_spectral_limit", "h=[1,0.5],L=64".into(), rel(r.mmse_l, r.spectral_mmse), 0.01));
    out.push(Check::at_most(
        "theta_sup_equivalence",
        "block h=[1,0.5],L=64".into(),
        (r.theta_sup_gmi_nats - r.gmi_l_nats).abs(),
        1e-6,
    ));
    let awgn = 0.5 * 2f64.ln();
    for l in [1, 4, 16, 64] {
        let r = block_gmi(&BlockLinearChannel::new(vec![1.0], 1.0, l, 1.0)?)?;
        out.push(Check::at_most("block_memoryless_collapse", format!("h=[1],L={l}"), (r.gmi_l_nats - awgn).abs(), 1e-12));
    }

    let process = ProcessSpec { ar_coefficient: 0.9, length: 1_000_000, energy: 1.0 };
    let clip = ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.0 };
    let st = bussgang_stationarity_check(&clip, &process, 10, &mut rng)?;
    out.push(Check::at_most(
        "bussgang_stationarity",
        "hard_clip(clip_level=1),rho=0.9 [stderr units]".into(),
        st.max_deviation.abs() / st.monte_carlo_stderr,
        4.0,
    ));
    Ok(out)
}
