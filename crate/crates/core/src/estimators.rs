//! First and second moments of (x, y), the linear and conditional-mean
//! front ends, and the correlation ratio.
//!
//! Quantizer channels are handled exactly: with v = x + z Gaussian,
//! E[x | v ∈ cell] = E_s/(E_s + σ²)·E[v | v ∈ cell]. Analog channels with
//! noise integrate over the output: E[(E[x|y])²] = ∫ N₁(y)²/p(y) dy with
//! p(y) = ∫ p(y|x)φ(x) dx and N₁(y) = ∫ x·p(y|x)φ(x) dx, each by composite
//! quadrature over x. Panel widths follow the local slope of the nonlinearity
//! so the likelihood peak is always resolved.

use alloc::vec::Vec;

use crate::channels::{ChannelModel, Cell, InputSpec, Nonlinearity, Structure};
use crate::error::{Error, Result};
use crate::math::{abs, exp, ln, sqrt};
use crate::quadrature::{self, GaussHermiteRule, WeightedRule, SPAN_SDS};

/// Quadrature resolution and the order-doubling convergence policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Gauss-Hermite order; composite panels shrink in proportion.
    pub order: usize,
    pub check_convergence: bool,
    pub tolerance: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { order: quadrature::DEFAULT_ORDER, check_convergence: true, tolerance: 1e-9 }
    }
}

impl QuadConfig {
    pub fn with_order(order: usize) -> Self {
        Self { order, ..Self::default() }
    }

    /// 129 → 257: twice the panels, the next odd Hermite order.
    pub fn doubled(&self) -> Self {
        Self { order: 2 * self.order - 1, check_convergence: false, tolerance: self.tolerance }
    }

    fn hermite(&self) -> Result<GaussHermiteRule> {
        GaussHermiteRule::new(self.order.min(quadrature::MAX_ORDER))
    }

    /// Composite panel width as a fraction of the local feature scale.
    pub(crate) fn panel_fraction(&self) -> f64 {
        48.0 / self.order as f64
    }
}

/// Model-based second-order statistics of a (channel, E_s) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub energy: f64,
    pub noise_var: f64,
    /// E[xy]
    pub cross_moment: f64,
    /// E[y²]
    pub output_power: f64,
    pub lmmse: f64,
    pub mmse: f64,
    /// var E[x|y]
    pub cond_mean_power: f64,
    pub correlation_ratio: f64,
    /// E[xy]/E_s
    pub bussgang_coeff: f64,
}

/// Output processing g applied before the nearest-neighbor decoder.
#[derive(Debug, Clone, PartialEq)]
pub enum FrontEnd {
    Identity,
    Scale(f64),
    PosteriorMean(PosteriorMean),
}

impl FrontEnd {
    pub fn apply(&self, y: f64) -> f64 {
        match self {
            FrontEnd::Identity => y,
            FrontEnd::Scale(c) => c * y,
            FrontEnd::PosteriorMean(pm) => pm.eval(y),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FrontEnd::Identity => "identity",
            FrontEnd::Scale(_) => "scale",
            FrontEnd::PosteriorMean(_) => "canonical",
        }
    }
}

/// g(y) = E[x | y].
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorMean {
    /// (output level, E[x | y = level]) for every reachable level.
    Table(Vec<(f64, f64)>),
    Analog(AnalogPosterior),
    Noiseless { map: Nonlinearity, energy: f64 },
}

impl PosteriorMean {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            PosteriorMean::Table(table) => {
                let idx = table.partition_point(|&(level, _)| level < y);
                let nearest = match (idx.checked_sub(1), table.get(idx)) {
                    (Some(i), Some(&(hi, _))) => {
                        if (y - table[i].0) <= (hi - y) {
                            i
                        } else {
                            idx
                        }
                    }
                    (Some(i), None) => i,
                    (None, _) => idx,
                };
                table.get(nearest).map_or(0.0, |&(_, g)| g)
            }
            PosteriorMean::Analog(post) => post.eval(y),
            PosteriorMean::Noiseless { map, energy } => map.noiseless_posterior_mean(y, *energy),
        }
    }
}

/// Lazily evaluated E[x|y] for y = h(x) + z, by quadrature over x.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogPosterior {
    noise_var: f64,
    // hs non-decreasing, so only a window of nodes around y contributes
    monotone: bool,
    xs: Vec<f64>,
    hs: Vec<f64>,
    ln_weights: Vec<f64>,
}

impl AnalogPosterior {
    fn new(map: Nonlinearity, noise_var: f64, energy: f64, quad: &QuadConfig) -> Self {
        let sd = sqrt(energy);
        let noise_sd = sqrt(noise_var);
        let frac = quad.panel_fraction();
        let rule = WeightedRule::gaussian_composite(0.0, energy, &map.breakpoints(), |x| {
            let s = map.slope(x);
            frac * if s > 0.0 { sd.min(noise_sd / s) } else { sd }
        });
        let (xs, ln_weights): (Vec<f64>, Vec<f64>) = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&x, &w)| (x, ln(w)))
            .unzip();
        let hs = xs.iter().map(|&x| map.apply(x)).collect();
        Self { noise_var, monotone: !matches!(map, Nonlinearity::Abs), xs, hs, ln_weights }
    }

    /// (ln scale, Σ, Σx) with p(y)·√(2πσ²) = e^{scale}·Σ and N₁ likewise.
    fn sums(&self, y: f64) -> (f64, f64, f64) {
        let inv = 0.5 / self.noise_var;
        let (lo, hi) = if self.monotone {
            // beyond 40 sd the kernel is below e^-800
            let reach = 40.0 * sqrt(self.noise_var);
            (self.hs.partition_point(|&h| h < y - reach), self.hs.partition_point(|&h| h <= y + reach))
        } else {
            (0, self.hs.len())
        };
        let (hs, ln_weights, xs) = (&self.hs[lo..hi], &self.ln_weights[lo..hi], &self.xs[lo..hi]);
        let mut peak = f64::NEG_INFINITY;
        for (h, lw) in hs.iter().zip(ln_weights) {
            let e = lw - (y - h) * (y - h) * inv;
            if e > peak {
                peak = e;
            }
        }
        let (mut s0, mut s1) = (0.0, 0.0);
        for ((h, lw), x) in hs.iter().zip(ln_weights).zip(xs) {
            let e = lw - (y - h) * (y - h) * inv - peak;
            if e > -745.0 {
                let v = exp(e);
                s0 += v;
                s1 += v * x;
            }
        }
        (peak, s0, s1)
    }

    pub fn eval(&self, y: f64) -> f64 {
        let (_, s0, s1) = self.sums(y);
        s1 / s0
    }
}

/// Joint law of the output and the input statistics needed by every
/// front end.
#[derive(Debug, Clone)]
pub(crate) enum OutputLaw {
    Finite { levels: Vec<f64>, probs: Vec<f64>, cond_means: Vec<f64> },
    /// y-quadrature nodes with p(y)·dy and N₁(y)·dy.
    Density { nodes: Vec<f64>, mass: Vec<f64>, first: Vec<f64> },
    Deterministic { rule: WeightedRule, map: Nonlinearity, energy: f64 },
}

impl OutputLaw {
    pub(crate) fn build(channel: &ChannelModel, input: &InputSpec, quad: &QuadConfig) -> Result<Self> {
        channel.validate()?;
        let energy = input.energy();
        match channel.structure() {
            Structure::Quantized { cells, noise_var } => finite_law(&cells, energy, noise_var),
            Structure::Analog { map, noise_var } if noise_var == 0.0 => Ok(OutputLaw::Deterministic {
                rule: x_rule(&map, energy, quad)?,
                map,
                energy,
            }),
            Structure::Analog { map, noise_var } => {
                let post = AnalogPosterior::new(map, noise_var, energy, quad);
                let noise_sd = sqrt(noise_var);
                let (lo, hi) = map.range_on(SPAN_SDS * sqrt(energy));
                let frac = quad.panel_fraction();
                let y_rule = quadrature::composite(
                    lo - SPAN_SDS * noise_sd,
                    hi + SPAN_SDS * noise_sd,
                    &[],
                    |y| frac * noise_sd.max(output_feature_scale(&map, y, energy)),
                );
                let norm = 1.0 / (sqrt(2.0 * core::f64::consts::PI) * noise_sd);
                let mut nodes = Vec::with_capacity(y_rule.len());
                let mut mass = Vec::with_capacity(y_rule.len());
                let mut first = Vec::with_capacity(y_rule.len());
                for (&y, &dy) in y_rule.nodes.iter().zip(&y_rule.weights) {
                    let (peak, s0, s1) = post.sums(y);
                    let scale = exp(peak) * norm * dy;
                    if scale > 0.0 && s0 > 0.0 {
                        nodes.push(y);
                        mass.push(scale * s0);
                        first.push(scale * s1);
                    }
                }
                Ok(OutputLaw::Density { nodes, mass, first })
            }
        }
    }

    /// E[(E[x|y])²]
    pub(crate) fn cond_mean_power(&self) -> f64 {
        match self {
            OutputLaw::Finite { probs, cond_means, .. } => {
                probs.iter().zip(cond_means).map(|(p, m)| p * m * m).sum()
            }
            OutputLaw::Density { mass, first, .. } => {
                mass.iter().zip(first).map(|(p, n)| n * n / p).sum()
            }
            OutputLaw::Deterministic { map, energy, .. } => map.noiseless_cond_mean_power(*energy),
        }
    }

    /// (E[x·g(y)], E[g(y)²])
    pub(crate) fn mapping_moments<G: Fn(f64) -> f64>(&self, g: G) -> (f64, f64) {
        match self {
            OutputLaw::Finite { levels, probs, cond_means } => {
                let mut xg = 0.0;
                let mut gg = 0.0;
                for ((&y, &p), &m) in levels.iter().zip(probs).zip(cond_means) {
                    let v = g(y);
                    xg += p * m * v;
                    gg += p * v * v;
                }
                (xg, gg)
            }
            OutputLaw::Density { nodes, mass, first } => {
                let mut xg = 0.0;
                let mut gg = 0.0;
                for ((&y, &p), &n) in nodes.iter().zip(mass).zip(first) {
                    let v = g(y);
                    xg += n * v;
                    gg += p * v * v;
                }
                (xg, gg)
            }
            OutputLaw::Deterministic { rule, map, .. } => {
                let xg = rule.sum(|x| x * g(map.apply(x)));
                let gg = rule.sum(|x| {
                    let v = g(map.apply(x));
                    v * v
                });
                (xg, gg)
            }
        }
    }
}

// Scale on which p(y) varies where the map is steep: slope times the scale
// of the input density at the preimage. Zero when noise dominates.
fn output_feature_scale(map: &Nonlinearity, y: f64, energy: f64) -> f64 {
    let x = match map {
        Nonlinearity::Identity | Nonlinearity::Cubic => map.noiseless_posterior_mean(y, energy),
        _ => return 0.0,
    };
    let sd = sqrt(energy);
    map.slope(x) * sd / (abs(x) / sd).max(1.0)
}

fn finite_law(cells: &[Cell], energy: f64, noise_var: f64) -> Result<OutputLaw> {
    let total = energy + noise_var;
    let shrink = energy / total;
    let mut levels = Vec::with_capacity(cells.len());
    let mut probs = Vec::with_capacity(cells.len());
    let mut cond_means = Vec::with_capacity(cells.len());
    for cell in cells {
        match quadrature::truncated_gaussian(cell.lower, cell.upper, 0.0, total) {
            Ok((mean, log_prob)) => {
                levels.push(cell.level);
                probs.push(exp(log_prob));
                cond_means.push(shrink * mean);
            }
            Err(Error::Underflow { .. }) => {
                log::warn!("output level {} is unreachable and is dropped", cell.level);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(OutputLaw::Finite { levels, probs, cond_means })
}

/// Rule for E[f(x)], x ~ N(0, energy), suited to f built from `map`.
fn x_rule(map: &Nonlinearity, energy: f64, quad: &QuadConfig) -> Result<WeightedRule> {
    // Hermite is exact for polynomial maps; kinks and nearby complex poles
    // (tanh) need panels.
    if matches!(map, Nonlinearity::Identity | Nonlinearity::Cubic) {
        Ok(WeightedRule::hermite(&quad.hermite()?, 0.0, energy))
    } else {
        let width = quad.panel_fraction() * sqrt(energy);
        Ok(WeightedRule::gaussian_composite(0.0, energy, &map.breakpoints(), |_| width))
    }
}

/// Moments for quantizer channels (closed form) and analog channels
/// (quadrature, with the order-doubling check when configured).
pub fn compute_moments(channel: &ChannelModel, input: &InputSpec, quad: &QuadConfig) -> Result<MomentReport> {
    let report = moments_once(channel, input, quad)?;
    if quad.check_convergence && matches!(channel.structure(), Structure::Analog { .. }) {
        let fine = moments_once(channel, input, &quad.doubled())?;
        let checks = [
            ("cross_moment", report.cross_moment, fine.cross_moment),
            ("output_power", report.output_power, fine.output_power),
            ("cond_mean_power", report.cond_mean_power, fine.cond_mean_power),
        ];
        for (quantity, coarse, fine) in checks {
            if (coarse - fine).abs() > quad.tolerance * coarse.abs().max(1.0) {
                return Err(Error::NonConvergence { quantity, coarse, fine });
            }
        }
    }
    Ok(report)
}

fn moments_once(channel: &ChannelModel, input: &InputSpec, quad: &QuadConfig) -> Result<MomentReport> {
    let energy = input.energy();
    let noise_var = channel.noise_var();
    let law = OutputLaw::build(channel, input, quad)?;
    let (cross_moment, output_power) = match (&law, channel.structure()) {
        (OutputLaw::Finite { levels, .. }, _) => law.mapping_moments(|y| {
            debug_assert!(levels.contains(&y));
            y
        }),
        (_, Structure::Analog { map, noise_var }) => {
            let rule = x_rule(&map, energy, quad)?;
            let cross = rule.sum(|x| x * map.apply(x));
            let power = rule.sum(|x| {
                let h = map.apply(x);
                h * h
            });
            (cross, power + noise_var)
        }
        _ => unreachable!("finite laws come from quantizers"),
    };
    if !(output_power > 0.0) {
        return Err(Error::Degenerate("channel output has zero power"));
    }
    let cond_mean_power = law.cond_mean_power().clamp(0.0, energy);
    let lmmse = (energy - cross_moment * cross_moment / output_power).clamp(0.0, energy);
    let mmse = (energy - cond_mean_power).clamp(0.0, energy);
    Ok(MomentReport {
        energy,
        noise_var,
        cross_moment,
        output_power,
        lmmse,
        mmse,
        cond_mean_power,
        correlation_ratio: sqrt(cond_mean_power / energy).min(1.0),
        bussgang_coeff: cross_moment / energy,
    })
}

/// (E[x·g(y)], E[g(y)²]) for an arbitrary output mapping.
pub fn mapping_moments<G: Fn(f64) -> f64>(
    channel: &ChannelModel,
    input: &InputSpec,
    g: G,
    quad: &QuadConfig,
) -> Result<(f64, f64)> {
    Ok(OutputLaw::build(channel, input, quad)?.mapping_moments(g))
}

/// The conditional-mean front end g(y) = E[x|y].
pub fn posterior_mean_front_end(channel: &ChannelModel, input: &InputSpec, quad: &QuadConfig) -> Result<FrontEnd> {
    channel.validate()?;
    let energy = input.energy();
    let pm = match channel.structure() {
        Structure::Quantized { cells, noise_var } => match finite_law(&cells, energy, noise_var)? {
            OutputLaw::Finite { levels, cond_means, .. } => {
                PosteriorMean::Table(levels.into_iter().zip(cond_means).collect())
            }
            _ => unreachable!(),
        },
        Structure::Analog { map, noise_var } if noise_var == 0.0 => PosteriorMean::Noiseless { map, energy },
        Structure::Analog { map, noise_var } => {
            PosteriorMean::Analog(AnalogPosterior::new(map, noise_var, energy, quad))
        }
    };
    Ok(FrontEnd::PosteriorMean(pm))
}

/// E[(y − (E[xy]/E_s)·x)·x], evaluated on a tensor rule over (x, z)
/// independently of the moment path. Zero up to quadrature error.
pub fn bussgang_residual_check(channel: &ChannelModel, input: &InputSpec, quad: &QuadConfig) -> Result<f64> {
    let moments = compute_moments(channel, input, quad)?;
    let coeff = moments.bussgang_coeff;
    let energy = input.energy();
    let frac = quad.panel_fraction();
    match channel.structure() {
        Structure::Analog { map, noise_var } => {
            let xr = x_rule(&map, energy, quad)?;
            let zr = WeightedRule::hermite(&GaussHermiteRule::new(quad.order.min(64))?, 0.0, noise_var);
            let mut acc = 0.0;
            for (&x, &wx) in xr.nodes.iter().zip(&xr.weights) {
                let h = map.apply(x);
                for (&z, &wz) in zr.nodes.iter().zip(&zr.weights) {
                    acc += wx * wz * (h + z - coeff * x) * x;
                }
            }
            Ok(acc)
        }
        Structure::Quantized { cells, noise_var } => {
            let bounds: Vec<f64> = cells.iter().map(|c| c.upper).filter(|u| u.is_finite()).collect();
            let scale = if noise_var > 0.0 { sqrt(noise_var).min(sqrt(energy)) } else { sqrt(energy) };
            let xr = WeightedRule::gaussian_composite(0.0, energy, &bounds, |_| frac * scale);
            Ok(xr.sum(|x| {
                let mean_y: f64 = cells
                    .iter()
                    .map(|c| c.level * crate::channels::cell_probability(c, x, noise_var))
                    .sum();
                (mean_y - coeff * x) * x
            }))
        }
    }
}
