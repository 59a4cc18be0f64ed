//! Random-coding link simulation with the nearest-neighbor decoder.
//!
//! Every trial draws a fresh Gaussian codebook and message from its own
//! ChaCha stream (seed, trial index), so results do not depend on how
//! trials are scheduled.
//!
//! Two decoders produce the same error-indicator distribution:
//!
//! * [`Decoder::Exhaustive`] materializes the codebook and runs
//!   [`nn_decode`]; limited to 65536 messages.
//! * [`Decoder::Conditional`] draws only the transmitted codeword. Given the
//!   processed output g and the true metric d₁ = ‖g − a·x₁‖², each competitor
//!   X ~ N(0, E_s I) independently beats it with probability
//!   p = P(a²E_s·χ'²_n(‖g‖²/(a²E_s)) ≤ d₁), so the trial errs with
//!   probability 1 − (1 − p)^{M−1}. This reaches block lengths whose
//!   codebooks could never be stored.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockmem::{block_nn_metric, BlockEstimator, BlockLinearChannel};
use crate::channels::{ChannelModel, InputSpec};
use crate::error::{invalid, Error, Result};
use crate::estimators::{compute_moments, posterior_mean_front_end, FrontEnd, QuadConfig};
use crate::gmi::{gmi_report, optimal_scaling};
use crate::math::{exp, expm1, ln, log1p, sqrt};
use crate::special::ln_noncentral_chi2_cdf;

/// Largest codebook the exhaustive decoder will build.
pub const EXHAUSTIVE_CAP: u64 = 65_536;
/// Largest ln M accepted by the conditional decoder.
pub const MAX_LN_MESSAGES: f64 = 700.0;
/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Row-major M × n matrix of codeword symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    messages: usize,
    n: usize,
    data: Vec<f64>,
}

impl Codebook {
    pub fn from_entries(messages: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if messages == 0 || n == 0 || data.len() != messages * n {
            return Err(invalid("codebook", "entries must fill messages × n"));
        }
        Ok(Self { messages, n, data })
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    pub fn block_length(&self) -> usize {
        self.n
    }

    pub fn codeword(&self, m: usize) -> &[f64] {
        &self.data[m * self.n..(m + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }
}

fn draw_codebook<R: Rng + ?Sized>(messages: usize, n: usize, energy: f64, rng: &mut R) -> Codebook {
    let sd = sqrt(energy);
    let data = (0..messages * n)
        .map(|_| {
            let t: f64 = StandardNormal.sample(rng);
            sd * t
        })
        .collect();
    Codebook { messages, n, data }
}

/// i.i.d. N(0, energy) codebook, a deterministic function of `seed`.
pub fn generate_codebook(messages: u64, n: usize, energy: f64, seed: u64) -> Result<Codebook> {
    if messages > EXHAUSTIVE_CAP {
        return Err(Error::CapExceeded { messages: messages as f64, cap: EXHAUSTIVE_CAP });
    }
    if messages == 0 || n == 0 {
        return Err(invalid("codebook", "needs at least one message and one symbol"));
    }
    if !(energy > 0.0) {
        return Err(invalid("energy", "must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_codebook(messages as usize, n, energy, &mut rng))
}

/// argmin_m Σ_k (g_k − a·x_k(m))², ties to the lowest index.
///
/// # Panics
///
/// If `processed` and the codewords differ in length.
pub fn nn_decode(processed: &[f64], codebook: &Codebook, a: f64) -> usize {
    assert_eq!(processed.len(), codebook.n, "processed output length must match the codeword length");
    let mut best = 0;
    let mut best_metric = f64::INFINITY;
    for m in 0..codebook.messages {
        let metric: f64 = processed
            .iter()
            .zip(codebook.codeword(m))
            .map(|(g, x)| (g - a * x) * (g - a * x))
            .sum();
        if metric < best_metric {
            best_metric = metric;
            best = m;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    /// Exhaustive when the codebook fits the cap, conditional otherwise.
    Auto,
    Exhaustive,
    Conditional,
}

impl Decoder {
    pub fn name(&self) -> &'static str {
        match self {
            Decoder::Auto => "auto",
            Decoder::Exhaustive => "exhaustive",
            Decoder::Conditional => "conditional",
        }
    }
}

/// Resolves `Auto` and enforces each decoder's message budget.
fn resolve_decoder(decoder: Decoder, ln_messages: f64) -> Result<Decoder> {
    let messages = libm::ceil(exp(ln_messages));
    if messages < 2.0 {
        return Err(invalid("rate_nats", "n·rate must give at least two messages"));
    }
    let fits = messages <= EXHAUSTIVE_CAP as f64;
    match decoder {
        Decoder::Auto if fits => Ok(Decoder::Exhaustive),
        Decoder::Exhaustive if !fits => Err(Error::CapExceeded { messages, cap: EXHAUSTIVE_CAP }),
        Decoder::Auto | Decoder::Conditional if ln_messages > MAX_LN_MESSAGES => {
            Err(invalid("rate_nats", alloc::format!("n·rate above {MAX_LN_MESSAGES} nats")))
        }
        Decoder::Auto => Ok(Decoder::Conditional),
        d => Ok(d),
    }
}

/// One random-coding experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub channel: ChannelModel,
    pub input: InputSpec,
    pub front_end: FrontEnd,
    pub scaling: f64,
    pub rate_nats: f64,
    pub n: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub decoder: Decoder,
}

impl TrialPlan {
    /// Validates the plan and resolves [`Decoder::Auto`].
    pub fn validated(mut self) -> Result<Self> {
        self.channel.validate()?;
        if self.n == 0 {
            return Err(invalid("n", "block length must be positive"));
        }
        if !(self.rate_nats > 0.0) || !self.rate_nats.is_finite() {
            return Err(invalid("rate_nats", "must be finite and > 0"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be positive"));
        }
        if self.scaling == 0.0 || !self.scaling.is_finite() {
            return Err(invalid("scaling", "must be finite and nonzero"));
        }
        self.decoder = resolve_decoder(self.decoder, self.ln_messages())?;
        Ok(self)
    }

    pub fn ln_messages(&self) -> f64 {
        self.n as f64 * self.rate_nats
    }

    /// M = ⌈e^{n·rate}⌉
    pub fn messages(&self) -> f64 {
        libm::ceil(exp(self.ln_messages()))
    }
}

fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Whether trial `index` of a validated plan ends in a decoding error.
pub fn trial_outcome(plan: &TrialPlan, index: u64) -> bool {
    let mut rng = trial_rng(plan.master_seed, index);
    let energy = plan.input.energy();
    match plan.decoder {
        Decoder::Exhaustive | Decoder::Auto => {
            let messages = plan.messages() as usize;
            let book = draw_codebook(messages, plan.n, energy, &mut rng);
            let sent = rng.random_range(0..messages);
            let processed: Vec<f64> = book
                .codeword(sent)
                .iter()
                .map(|&x| plan.front_end.apply(plan.channel.sample_output(x, &mut rng)))
                .collect();
            nn_decode(&processed, &book, plan.scaling) != sent
        }
        Decoder::Conditional => {
            let sd = sqrt(energy);
            let mut processed = Vec::with_capacity(plan.n);
            let mut sent = Vec::with_capacity(plan.n);
            for _ in 0..plan.n {
                let t: f64 = StandardNormal.sample(&mut rng);
                let x = sd * t;
                sent.push(x);
                processed.push(plan.front_end.apply(plan.channel.sample_output(x, &mut rng)));
            }
            conditional_error(&processed, &sent, plan.scaling, energy, plan.messages(), &mut rng)
        }
    }
}

// Bernoulli draw of the exhaustive decoder's error indicator given (g, x₁).
fn conditional_error<R: Rng + ?Sized>(
    processed: &[f64],
    sent: &[f64],
    a: f64,
    energy: f64,
    messages: f64,
    rng: &mut R,
) -> bool {
    let scale = a * a * energy;
    let true_metric: f64 = processed.iter().zip(sent).map(|(g, x)| (g - a * x) * (g - a * x)).sum();
    let noncentrality = processed.iter().map(|g| g * g).sum::<f64>() / scale;
    let ln_beat = ln_noncentral_chi2_cdf(true_metric / scale, processed.len() as f64, noncentrality);
    // Expected number of winning competitors, (M − 1)·(−ln(1 − p)).
    let winners = if ln_beat < -30.0 {
        exp(ln(messages - 1.0) + ln_beat)
    } else {
        -(messages - 1.0) * log1p(-exp(ln_beat).min(1.0))
    };
    let err_prob = -expm1(-winners);
    rng.random::<f64>() < err_prob
}

/// Error count with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRateEstimate {
    pub errors: u64,
    pub trials: u64,
    pub point_estimate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl ErrorRateEstimate {
    pub fn from_counts(errors: u64, trials: u64) -> Self {
        assert!(trials > 0 && errors <= trials);
        let n = trials as f64;
        let p = errors as f64 / n;
        let z2 = WILSON_Z * WILSON_Z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = WILSON_Z * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        Self {
            errors,
            trials,
            point_estimate: p,
            wilson_lo: (center - half).max(0.0).min(p),
            wilson_hi: (center + half).min(1.0).max(p),
        }
    }

    /// Intervals are disjoint and this one lies below `other`.
    pub fn separated_below(&self, other: &Self) -> bool {
        self.wilson_hi < other.wilson_lo
    }
}

/// Sequential run of every trial in the plan.
pub fn run_trials(plan: &TrialPlan) -> Result<ErrorRateEstimate> {
    let plan = plan.clone().validated()?;
    let errors = (0..plan.trials).filter(|&i| trial_outcome(&plan, i)).count() as u64;
    Ok(ErrorRateEstimate::from_counts(errors, plan.trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontEndChoice {
    /// Raw output, a = E[xy]/E_s (the Bussgang coefficient).
    Identity,
    /// Conditional mean, a = var E[x|y]/E_s.
    Canonical,
}

impl FrontEndChoice {
    pub fn name(&self) -> &'static str {
        match self {
            FrontEndChoice::Identity => "identity",
            FrontEndChoice::Canonical => "canonical",
        }
    }
}

/// Front end, its optimal scaling, and the GMI it achieves.
pub fn front_end_setup(
    channel: &ChannelModel,
    input: &InputSpec,
    choice: FrontEndChoice,
    quad: &QuadConfig,
) -> Result<(FrontEnd, f64, f64)> {
    let moments = compute_moments(channel, input, quad)?;
    let front_end = match choice {
        FrontEndChoice::Identity => FrontEnd::Identity,
        FrontEndChoice::Canonical => posterior_mean_front_end(channel, input, quad)?,
    };
    let report = gmi_report(&moments, &front_end)?;
    Ok((front_end.clone(), optimal_scaling(&moments, &front_end), report.gmi_nats))
}

/// One cell of a threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub plan: TrialPlan,
    pub gmi_ref_nats: f64,
    pub front_end: FrontEndChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rate_nats: f64,
    pub n: usize,
    pub messages: f64,
    pub estimate: ErrorRateEstimate,
    pub gmi_ref_nats: f64,
    pub front_end: FrontEndChoice,
    pub seed: u64,
}

/// Sweep grid parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub rates: Vec<f64>,
    pub block_lengths: Vec<usize>,
    pub front_end: FrontEndChoice,
    pub trials: u64,
    pub master_seed: u64,
    pub decoder: Decoder,
}

/// Validated plans in rate-major grid order. Every cell shares the master
/// seed, so cells with equal n see common random numbers.
pub fn sweep_cells(
    channel: &ChannelModel,
    input: &InputSpec,
    spec: &SweepSpec,
    quad: &QuadConfig,
) -> Result<Vec<SweepCell>> {
    if spec.rates.is_empty() || spec.block_lengths.is_empty() {
        return Err(invalid("grid", "rate and block-length grids must be nonempty"));
    }
    let (front_end, scaling, gmi_ref_nats) = front_end_setup(channel, input, spec.front_end, quad)?;
    let mut cells = Vec::with_capacity(spec.rates.len() * spec.block_lengths.len());
    for &rate_nats in &spec.rates {
        for &n in &spec.block_lengths {
            let plan = TrialPlan {
                channel: channel.clone(),
                input: *input,
                front_end: front_end.clone(),
                scaling,
                rate_nats,
                n,
                trials: spec.trials,
                master_seed: spec.master_seed,
                decoder: spec.decoder,
            }
            .validated()?;
            cells.push(SweepCell { plan, gmi_ref_nats, front_end: spec.front_end });
        }
    }
    Ok(cells)
}

impl SweepCell {
    pub fn row(&self, estimate: ErrorRateEstimate) -> SweepRow {
        SweepRow {
            rate_nats: self.plan.rate_nats,
            n: self.plan.n,
            messages: self.plan.messages(),
            estimate,
            gmi_ref_nats: self.gmi_ref_nats,
            front_end: self.front_end,
            seed: self.plan.master_seed,
        }
    }
}

/// Error rate for every (rate, n) cell, sequentially.
pub fn threshold_sweep(
    channel: &ChannelModel,
    input: &InputSpec,
    spec: &SweepSpec,
    quad: &QuadConfig,
) -> Result<Vec<SweepRow>> {
    sweep_cells(channel, input, spec, quad)?
        .iter()
        .map(|cell| Ok(cell.row(run_trials(&cell.plan)?)))
        .collect()
}

/// Processing of each length-L received block before decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockFrontEnd {
    Identity,
    ConditionalMean,
}

/// Random coding over super-symbols of a block channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrialPlan {
    pub channel: BlockLinearChannel,
    pub front_end: BlockFrontEnd,
    pub scaling: f64,
    /// Nats per channel use.
    pub rate_nats: f64,
    /// Super-symbols per codeword.
    pub blocks: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub decoder: Decoder,
}

impl BlockTrialPlan {
    pub fn symbols(&self) -> usize {
        self.blocks * self.channel.block_length()
    }

    pub fn messages(&self) -> f64 {
        libm::ceil(exp(self.symbols() as f64 * self.rate_nats))
    }
}

/// Block-mode counterpart of [`run_trials`], decoding with [`block_nn_metric`].
pub fn run_block_trials(plan: &BlockTrialPlan) -> Result<ErrorRateEstimate> {
    if plan.blocks == 0 || plan.trials == 0 || !(plan.rate_nats > 0.0) {
        return Err(invalid("plan", "blocks, trials and rate must be positive"));
    }
    if plan.scaling == 0.0 || !plan.scaling.is_finite() {
        return Err(invalid("scaling", "must be finite and nonzero"));
    }
    let decoder = resolve_decoder(plan.decoder, plan.symbols() as f64 * plan.rate_nats)?;
    let estimator = plan.channel.estimator()?;
    let mut errors = 0;
    for index in 0..plan.trials {
        if block_trial_outcome(plan, decoder, &estimator, index)? {
            errors += 1;
        }
    }
    Ok(ErrorRateEstimate::from_counts(errors, plan.trials))
}

fn block_trial_outcome(
    plan: &BlockTrialPlan,
    decoder: Decoder,
    estimator: &BlockEstimator,
    index: u64,
) -> Result<bool> {
    let mut rng = trial_rng(plan.master_seed, index);
    let energy = plan.channel.energy();
    let block = plan.channel.block_length();
    let symbols = plan.symbols();
    let mut front_end = |y: &[f64]| match plan.front_end {
        BlockFrontEnd::Identity => y.to_vec(),
        BlockFrontEnd::ConditionalMean => estimator.conditional_mean(y).unwrap_or_else(|_| y.to_vec()),
    };
    let transmit = |x: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        x.chunks(block).flat_map(|xb| plan.channel.sample_block(xb, rng)).collect()
    };
    match decoder {
        Decoder::Conditional => {
            let sent = draw_codebook(1, symbols, energy, &mut rng);
            let y = transmit(sent.codeword(0), &mut rng);
            let processed: Vec<f64> = y.chunks(block).flat_map(&mut front_end).collect();
            Ok(conditional_error(&processed, sent.codeword(0), plan.scaling, energy, plan.messages(), &mut rng))
        }
        _ => {
            let messages = plan.messages() as usize;
            let book = draw_codebook(messages, symbols, energy, &mut rng);
            let sent = rng.random_range(0..messages);
            let y = transmit(book.codeword(sent), &mut rng);
            let processed: Vec<f64> = y.chunks(block).flat_map(&mut front_end).collect();
            let mut best = 0;
            let mut best_metric = f64::INFINITY;
            for m in 0..messages {
                let metric = block_nn_metric(&processed, book.codeword(m), block, plan.scaling, |g| g.to_vec())?;
                if metric < best_metric {
                    best_metric = metric;
                    best = m;
                }
            }
            Ok(best != sent)
        }
    }
}

/// ln of the probability that one random competitor beats the sent codeword,
/// exposed for diagnostics.
pub fn ln_competitor_win(processed: &[f64], sent: &[f64], a: f64, energy: f64) -> f64 {
    let scale = a * a * energy;
    let d1: f64 = processed.iter().zip(sent).map(|(g, x)| (g - a * x) * (g - a * x)).sum();
    let lambda = processed.iter().map(|g| g * g).sum::<f64>() / scale;
    ln_noncentral_chi2_cdf(d1 / scale, processed.len() as f64, lambda)
}
