//! Command drivers. Each returns a [`Table`] in deterministic row order.

use gmi_core::blockmem::{block_gmi, BlockLinearChannel};
use gmi_core::gmi::{effective_snr_canonical, effective_snr_linear, gmi_from_delta};
use gmi_core::linksim::{front_end_setup, sweep_cells, trial_outcome, ErrorRateEstimate, SweepSpec, TrialPlan};
use gmi_core::{
    compute_moments, estimators::posterior_mean_front_end, ChannelModel, Error, InputSpec, OutputAlphabet, QuadConfig,
};
use rayon::prelude::*;

use crate::config::{RateGrid, RunConfig, SweepGrid};
use crate::{fmt_count, fmt_num, CliError, Table};

pub const ANALYZE_COLUMNS: [&str; 14] = [
    "E_s",
    "noise_var",
    "delta",
    "theta",
    "bussgang_coeff",
    "lmmse",
    "mmse",
    "eff_snr_linear",
    "eff_snr_canonical",
    "gmi_linear_nats",
    "gmi_canonical_nats",
    "gmi_linear_bits",
    "gmi_canonical_bits",
    "degenerate_flag",
];

pub const SIMULATE_COLUMNS: [&str; 11] = [
    "rate_nats",
    "n",
    "M",
    "trials",
    "errors",
    "error_rate",
    "ci_lo",
    "ci_hi",
    "gmi_ref_nats",
    "front_end",
    "seed",
];

pub const BLOCK_COLUMNS: [&str; 9] = [
    "L",
    "mmse_l",
    "gmi_l_nats",
    "gmi_l_bits",
    "spectral_mmse",
    "spectral_gmi_nats",
    "spectral_gmi_bits",
    "theta_sup_gmi_nats",
    "theta_sup_gmi_bits",
];

pub const FRONTEND_COLUMNS: [&str; 3] = ["y", "posterior_mean", "lmmse"];

fn bits(nats: f64) -> f64 {
    nats / core::f64::consts::LN_2
}

/// One analysis row. `delta` and `theta` describe the canonical front end:
/// Δ = var E[x|y]/E_s = Θ².
pub fn analyze_row(channel: &ChannelModel, energy: f64, quad: &QuadConfig) -> Result<Vec<String>, Error> {
    let input = InputSpec::new(energy)?;
    let m = compute_moments(channel, &input, quad)?;
    if m.output_power.is_nan() || m.output_power <= 0.0 {
        return Err(Error::Degenerate("zero output power"));
    }
    let linear = gmi_from_delta(m.cross_moment * m.cross_moment / (m.energy * m.output_power))?;
    let canonical = gmi_from_delta(m.cond_mean_power / m.energy)?;
    Ok(vec![
        fmt_num(m.energy),
        fmt_num(m.noise_var),
        fmt_num(canonical.delta),
        fmt_num(m.correlation_ratio),
        fmt_num(m.bussgang_coeff),
        fmt_num(m.lmmse),
        fmt_num(m.mmse),
        fmt_num(effective_snr_linear(&m)),
        fmt_num(effective_snr_canonical(&m)),
        fmt_num(linear.gmi_nats),
        fmt_num(canonical.gmi_nats),
        fmt_num(linear.gmi_bits),
        fmt_num(canonical.gmi_bits),
        (linear.degenerate || canonical.degenerate).to_string(),
    ])
}

pub fn analyze(cfg: &RunConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&ANALYZE_COLUMNS);
    t.push(analyze_row(cfg.require_channel()?, cfg.energy, &cfg.quad())?);
    Ok(t)
}

/// The conditional-mean map and the LMMSE map E[xy]/E[y²]·y, tabulated on
/// the output alphabet or on a grid spanning ±4 output standard deviations.
pub fn dump_frontend(cfg: &RunConfig) -> Result<Table, CliError> {
    let channel = cfg.require_channel()?;
    let quad = cfg.quad();
    let input = InputSpec::new(cfg.energy)?;
    let m = compute_moments(channel, &input, &quad)?;
    let g = posterior_mean_front_end(channel, &input, &quad)?;
    let gain = m.cross_moment / m.output_power;
    let ys: Vec<f64> = match channel.output_alphabet() {
        OutputAlphabet::Finite(levels) => levels,
        OutputAlphabet::Continuous => {
            let span = 4.0 * m.output_power.sqrt();
            (0..=200).map(|k| -span + 2.0 * span * k as f64 / 200.0).collect()
        }
    };
    let mut t = Table::new(&FRONTEND_COLUMNS);
    for y in ys {
        t.push(vec![fmt_num(y), fmt_num(g.apply(y)), fmt_num(gain * y)]);
    }
    Ok(t)
}

pub fn sweep(cfg: &RunConfig) -> Result<Table, CliError> {
    let channel = cfg.require_channel()?;
    let grid = cfg.sweep.as_ref().ok_or_else(|| CliError::config("sweep: required for this command"))?;
    let quad = cfg.quad();
    let points: Vec<(ChannelModel, f64)> = match grid {
        SweepGrid::Snr(snrs) => snrs.iter().map(|s| (channel.with_noise_var(cfg.energy / s), cfg.energy)).collect(),
        SweepGrid::Energy(es) => es.iter().map(|&e| (channel.clone(), e)).collect(),
    };
    let rows = points
        .par_iter()
        .map(|(ch, e)| analyze_row(ch, *e, &quad))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Table { header: ANALYZE_COLUMNS.to_vec(), rows })
}

/// Error count for a validated plan; trials run in parallel and the count
/// does not depend on scheduling.
pub fn count_errors(plan: &TrialPlan) -> u64 {
    (0..plan.trials).into_par_iter().filter(|&i| trial_outcome(plan, i)).count() as u64
}

pub fn simulate(cfg: &RunConfig) -> Result<Table, CliError> {
    let channel = cfg.require_channel()?;
    let spec = cfg.simulate.as_ref().ok_or_else(|| CliError::config("simulate: required for this command"))?;
    let input = InputSpec::new(cfg.energy)?;
    let quad = cfg.quad();
    let rates = match &spec.rates {
        RateGrid::Nats(r) => r.clone(),
        RateGrid::GmiFractions(f) => {
            let (_, _, gmi) = front_end_setup(channel, &input, spec.front_end, &quad)?;
            if !gmi.is_finite() || gmi <= 0.0 {
                return Err(CliError::Failed(format!("GMI {gmi} cannot anchor gmi_fractions")));
            }
            f.iter().map(|x| x * gmi).collect()
        }
    };
    let sweep = SweepSpec {
        rates,
        block_lengths: spec.block_lengths.clone(),
        front_end: spec.front_end,
        trials: spec.trials,
        master_seed: cfg.seed,
        decoder: spec.decoder,
    };
    let cells = sweep_cells(channel, &input, &sweep, &quad).map_err(|e| match e {
        Error::InvalidParameter { .. } | Error::CapExceeded { .. } => CliError::config(format!("simulate: {e}")),
        e => e.into(),
    })?;
    let mut t = Table::new(&SIMULATE_COLUMNS);
    for cell in &cells {
        log::info!("rate {} nats, n = {}: {} trials", cell.plan.rate_nats, cell.plan.n, cell.plan.trials);
        let row = cell.row(ErrorRateEstimate::from_counts(count_errors(&cell.plan), cell.plan.trials));
        let est = row.estimate;
        t.push(vec![
            fmt_num(row.rate_nats),
            row.n.to_string(),
            fmt_count(row.messages),
            est.trials.to_string(),
            est.errors.to_string(),
            fmt_num(est.point_estimate),
            fmt_num(est.wilson_lo),
            fmt_num(est.wilson_hi),
            fmt_num(row.gmi_ref_nats),
            row.front_end.name().to_string(),
            row.seed.to_string(),
        ]);
    }
    Ok(t)
}

pub fn block(cfg: &RunConfig) -> Result<Table, CliError> {
    let spec = cfg.block.as_ref().ok_or_else(|| CliError::config("block: required for this command"))?;
    let reports = spec
        .block_lengths
        .par_iter()
        .map(|&l| block_gmi(&BlockLinearChannel::new(spec.impulse_response.clone(), spec.noise_var, l, cfg.energy)?))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut t = Table::new(&BLOCK_COLUMNS);
    for r in reports {
        t.push(vec![
            r.block_length.to_string(),
            fmt_num(r.mmse_l),
            fmt_num(r.gmi_l_nats),
            fmt_num(bits(r.gmi_l_nats)),
            fmt_num(r.spectral_mmse),
            fmt_num(r.spectral_gmi_nats),
            fmt_num(bits(r.spectral_gmi_nats)),
            fmt_num(r.theta_sup_gmi_nats),
            fmt_num(bits(r.theta_sup_gmi_nats)),
        ]);
    }
    Ok(t)
}
