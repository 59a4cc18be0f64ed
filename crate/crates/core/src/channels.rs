//! Memoryless distortion channels.
//!
//! Analog impairments add noise after the nonlinearity, `y = h(x) + z`.
//! Quantizers model an ADC and quantize after the noise, `y = Q(x + z)`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::math::{norm_pdf, sqrt, std_interval_prob, std_truncated};

/// Gaussian input ensemble N(0, energy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputSpec {
    energy: f64,
}

impl InputSpec {
    pub fn new(energy: f64) -> Result<Self> {
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(invalid("energy", alloc::format!("{energy} must be finite and > 0")));
        }
        Ok(Self { energy })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn sd(&self) -> f64 {
        sqrt(self.energy)
    }
}

/// Deterministic memoryless maps available to analog channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Identity,
    /// Saturates at ±level.
    Clip { level: f64 },
    /// y = x³
    Cubic,
    /// y = |x|
    Abs,
    /// Third-order soft limiter: level·(1.5u − 0.5u³) with u = x/level on
    /// |u| ≤ 1, saturated at ±level outside. C¹ at the knees.
    SoftLimiter { level: f64 },
    /// y = tanh(gain·x)
    Tanh { gain: f64 },
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::Clip { level } | Nonlinearity::SoftLimiter { level } => {
                if !(level > 0.0) || !level.is_finite() {
                    return Err(invalid("clip_level", alloc::format!("{level} must be > 0")));
                }
            }
            Nonlinearity::Tanh { gain } if !(gain > 0.0) || !gain.is_finite() => {
                return Err(invalid("gain", alloc::format!("{gain} must be > 0")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Identity => x,
            Nonlinearity::Clip { level } => x.clamp(-level, level),
            Nonlinearity::Cubic => x * x * x,
            Nonlinearity::Abs => x.abs(),
            Nonlinearity::SoftLimiter { level } => {
                let u = x / level;
                if u >= 1.0 {
                    level
                } else if u <= -1.0 {
                    -level
                } else {
                    level * (1.5 * u - 0.5 * u * u * u)
                }
            }
            Nonlinearity::Tanh { gain } => libm::tanh(gain * x),
        }
    }

    /// |h'(x)|, used to size quadrature panels.
    pub fn slope(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Identity | Nonlinearity::Abs => 1.0,
            Nonlinearity::Clip { level } => {
                if x.abs() < level {
                    1.0
                } else {
                    0.0
                }
            }
            Nonlinearity::Cubic => 3.0 * x * x,
            Nonlinearity::SoftLimiter { level } => {
                let u = x / level;
                if u.abs() < 1.0 {
                    1.5 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Nonlinearity::Tanh { gain } => {
                let t = libm::tanh(gain * x);
                gain * (1.0 - t * t)
            }
        }
    }

    /// Points where h or one of its low derivatives is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Nonlinearity::Clip { level } | Nonlinearity::SoftLimiter { level } => alloc::vec![-level, level],
            Nonlinearity::Abs => alloc::vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Range of h over [-bound, bound].
    pub(crate) fn range_on(&self, bound: f64) -> (f64, f64) {
        match *self {
            Nonlinearity::Abs => (0.0, bound),
            // the rest are non-decreasing
            _ => (self.apply(-bound), self.apply(bound)),
        }
    }

    /// E[x | h(x) = y] for x ~ N(0, energy) when no noise is present.
    pub fn noiseless_posterior_mean(&self, y: f64, energy: f64) -> f64 {
        let sd = sqrt(energy);
        let saturated = |level: f64| {
            let (m, _) = std_truncated(level / sd, f64::INFINITY);
            if y > 0.0 {
                sd * m
            } else {
                -sd * m
            }
        };
        match *self {
            Nonlinearity::Identity => y,
            Nonlinearity::Cubic => libm::cbrt(y),
            Nonlinearity::Abs => 0.0,
            Nonlinearity::Tanh { gain } => libm::atanh(y.clamp(-1.0, 1.0)) / gain,
            Nonlinearity::Clip { level } => {
                if y.abs() >= level {
                    saturated(level)
                } else {
                    y
                }
            }
            Nonlinearity::SoftLimiter { level } => {
                if y.abs() >= level {
                    saturated(level)
                } else {
                    level * invert_soft_limiter(y / level)
                }
            }
        }
    }

    /// var E[x | h(x)] for x ~ N(0, energy), closed form.
    pub fn noiseless_cond_mean_power(&self, energy: f64) -> f64 {
        match *self {
            Nonlinearity::Identity | Nonlinearity::Cubic | Nonlinearity::Tanh { .. } => energy,
            Nonlinearity::Abs => 0.0,
            Nonlinearity::Clip { level } | Nonlinearity::SoftLimiter { level } => {
                // invertible on (-level, level), two saturation atoms outside
                let a = level / sqrt(energy);
                let inner = (1.0 - 2.0 * crate::math::norm_sf(a)) - 2.0 * a * norm_pdf(a);
                let (m, log_p) = std_truncated(a, f64::INFINITY);
                energy * (inner + 2.0 * libm::exp(log_p) * m * m)
            }
        }
    }
}

// Solves 1.5u - 0.5u³ = v on [-1, 1] for |v| < 1.
fn invert_soft_limiter(v: f64) -> f64 {
    // trigonometric root of u³ - 3u + 2v = 0 lying in [-1, 1]
    let phi = libm::acos(-v);
    2.0 * libm::cos((phi - 2.0 * core::f64::consts::PI) / 3.0)
}

/// One quantizer cell: input interval [lower, upper) and its reconstruction level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

pub const MAX_QUANTIZER_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    Awgn { noise_var: f64 },
    HardClip { clip_level: f64, noise_var: f64 },
    /// y = sign(x + z), levels ±1.
    SignQuantizer { noise_var: f64 },
    /// Symmetric mid-rise quantizer of x + z with 2^bits levels.
    UniformQuantizer { bits: u32, step: f64, noise_var: f64 },
    DeterministicNonlinearity { shape: Nonlinearity, noise_var: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputAlphabet {
    Continuous,
    /// Strictly increasing output levels.
    Finite(Vec<f64>),
}

/// Internal view of a channel: analog map plus noise, or quantizer cells.
#[derive(Debug, Clone)]
pub(crate) enum Structure {
    Analog { map: Nonlinearity, noise_var: f64 },
    Quantized { cells: Vec<Cell>, noise_var: f64 },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        let noise_var = self.noise_var();
        if !(noise_var >= 0.0) || !noise_var.is_finite() {
            return Err(invalid("noise_var", alloc::format!("{noise_var} must be finite and >= 0")));
        }
        match *self {
            ChannelModel::HardClip { clip_level, .. } => {
                Nonlinearity::Clip { level: clip_level }.validate()?;
            }
            ChannelModel::UniformQuantizer { bits, step, .. } => {
                if bits == 0 || bits > MAX_QUANTIZER_BITS {
                    return Err(invalid("bits", alloc::format!("{bits} not in 1..={MAX_QUANTIZER_BITS}")));
                }
                if !(step > 0.0) || !step.is_finite() {
                    return Err(invalid("step", alloc::format!("{step} must be > 0")));
                }
            }
            ChannelModel::DeterministicNonlinearity { shape, .. } => shape.validate()?,
            _ => {}
        }
        Ok(())
    }

    pub fn noise_var(&self) -> f64 {
        match *self {
            ChannelModel::Awgn { noise_var }
            | ChannelModel::HardClip { noise_var, .. }
            | ChannelModel::SignQuantizer { noise_var }
            | ChannelModel::UniformQuantizer { noise_var, .. }
            | ChannelModel::DeterministicNonlinearity { noise_var, .. } => noise_var,
        }
    }

    /// Same channel with a different noise variance.
    pub fn with_noise_var(&self, noise_var: f64) -> Self {
        let mut ch = self.clone();
        match &mut ch {
            ChannelModel::Awgn { noise_var: v }
            | ChannelModel::HardClip { noise_var: v, .. }
            | ChannelModel::SignQuantizer { noise_var: v }
            | ChannelModel::UniformQuantizer { noise_var: v, .. }
            | ChannelModel::DeterministicNonlinearity { noise_var: v, .. } => *v = noise_var,
        }
        ch
    }

    pub(crate) fn structure(&self) -> Structure {
        let noise_var = self.noise_var();
        match *self {
            ChannelModel::Awgn { .. } => Structure::Analog { map: Nonlinearity::Identity, noise_var },
            ChannelModel::HardClip { clip_level, .. } => {
                Structure::Analog { map: Nonlinearity::Clip { level: clip_level }, noise_var }
            }
            ChannelModel::DeterministicNonlinearity { shape, .. } => Structure::Analog { map: shape, noise_var },
            ChannelModel::SignQuantizer { .. } | ChannelModel::UniformQuantizer { .. } => {
                Structure::Quantized { cells: self.cells().unwrap_or_default(), noise_var }
            }
        }
    }

    /// Quantizer cells in increasing order, `None` for analog channels.
    pub fn cells(&self) -> Option<Vec<Cell>> {
        let inf = f64::INFINITY;
        match *self {
            ChannelModel::SignQuantizer { .. } => Some(alloc::vec![
                Cell { lower: -inf, upper: 0.0, level: -1.0 },
                Cell { lower: 0.0, upper: inf, level: 1.0 },
            ]),
            ChannelModel::UniformQuantizer { bits, step, .. } => {
                let half = 1i64 << (bits - 1);
                Some(
                    (-half..half)
                        .map(|k| Cell {
                            lower: if k == -half { -inf } else { k as f64 * step },
                            upper: if k == half - 1 { inf } else { (k + 1) as f64 * step },
                            level: (k as f64 + 0.5) * step,
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }

    pub fn output_alphabet(&self) -> OutputAlphabet {
        match self.cells() {
            Some(cells) => OutputAlphabet::Finite(cells.iter().map(|c| c.level).collect()),
            None => OutputAlphabet::Continuous,
        }
    }

    /// Noise-free output, ignoring `noise_var`.
    pub fn deterministic_output(&self, x: f64) -> f64 {
        match self.structure() {
            Structure::Analog { map, .. } => map.apply(x),
            Structure::Quantized { .. } => self.quantize(x),
        }
    }

    fn quantize(&self, v: f64) -> f64 {
        match *self {
            ChannelModel::SignQuantizer { .. } => {
                if v >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            ChannelModel::UniformQuantizer { bits, step, .. } => {
                let top = (1i64 << (bits - 1)) as f64 - 0.5;
                (libm::floor(v / step) + 0.5).clamp(-top, top) * step
            }
            _ => v,
        }
    }

    /// One draw of y given x. With zero noise no randomness is consumed.
    pub fn sample_output<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let noise_var = self.noise_var();
        let z = if noise_var > 0.0 {
            let t: f64 = StandardNormal.sample(rng);
            sqrt(noise_var) * t
        } else {
            0.0
        };
        match self.structure() {
            Structure::Analog { map, .. } => map.apply(x) + z,
            Structure::Quantized { .. } => self.quantize(x + z),
        }
    }

    /// Density (analog) or probability mass (quantized) of y given x.
    pub fn likelihood(&self, y: f64, x: f64) -> Result<f64> {
        match self.structure() {
            Structure::Analog { map, noise_var } => {
                if noise_var == 0.0 {
                    return Err(Error::InvalidQuery("noiseless analog channel has no density".into()));
                }
                let sd = sqrt(noise_var);
                Ok(norm_pdf((y - map.apply(x)) / sd) / sd)
            }
            Structure::Quantized { cells, noise_var } => {
                let cell = find_level(&cells, y)
                    .ok_or_else(|| Error::InvalidQuery(alloc::format!("{y} is not an output level")))?;
                Ok(cell_probability(&cell, x, noise_var))
            }
        }
    }
}

/// Exact level match, tolerant to last-digit formatting noise.
pub(crate) fn find_level(cells: &[Cell], y: f64) -> Option<Cell> {
    let idx = cells.partition_point(|c| c.level < y);
    [idx.checked_sub(1), Some(idx)]
        .into_iter()
        .flatten()
        .filter_map(|i| cells.get(i))
        .find(|c| (c.level - y).abs() <= 1e-12 * c.level.abs().max(1.0))
        .copied()
}

/// P(x + z ∈ cell) for z ~ N(0, noise_var).
pub(crate) fn cell_probability(cell: &Cell, x: f64, noise_var: f64) -> f64 {
    if noise_var == 0.0 {
        return if x >= cell.lower && x < cell.upper { 1.0 } else { 0.0 };
    }
    let sd = sqrt(noise_var);
    std_interval_prob((cell.lower - x) / sd, (cell.upper - x) / sd)
}

/// Stationary AR(1) Gaussian process with R_xx(τ) = energy·ρ^|τ|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSpec {
    pub ar_coefficient: f64,
    pub length: usize,
    pub energy: f64,
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ar_coefficient.abs() < 1.0) {
            return Err(invalid("ar_coefficient", "must lie in (-1, 1)"));
        }
        if self.length == 0 {
            return Err(invalid("length", "must be positive"));
        }
        if !(self.energy > 0.0) || !self.energy.is_finite() {
            return Err(Error::Degenerate("process energy must be positive"));
        }
        Ok(())
    }

    /// A realization started in the stationary distribution.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sd = sqrt(self.energy);
        let innov = sd * sqrt(1.0 - self.ar_coefficient * self.ar_coefficient);
        let mut out = Vec::with_capacity(self.length);
        let first: f64 = StandardNormal.sample(rng);
        let mut prev = sd * first;
        out.push(prev);
        for _ in 1..self.length {
            let w: f64 = StandardNormal.sample(rng);
            prev = self.ar_coefficient * prev + innov * w;
            out.push(prev);
        }
        out
    }
}

/// Outcome of [`bussgang_stationarity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    /// R̂_xy(τ) − (R̂_xy(0)/R̂_xx(0))·R̂_xx(τ) for τ = 0..=tau_max.
    pub deviations: Vec<f64>,
    /// Batch-means standard error of each deviation.
    pub stderrs: Vec<f64>,
    pub max_deviation: f64,
    /// Standard error at the lag attaining `max_deviation`.
    pub monte_carlo_stderr: f64,
}

impl StationarityReport {
    /// Every lag within `k` standard errors of zero.
    pub fn within(&self, k: f64) -> bool {
        self.deviations.iter().zip(&self.stderrs).all(|(d, s)| d.abs() <= k * s)
    }
}

const STATIONARITY_BATCHES: usize = 50;

/// Checks that the input/output cross-correlation of a noiseless memoryless
/// nonlinearity driven by a stationary Gaussian process is a scaled copy of
/// the input autocorrelation.
pub fn bussgang_stationarity_check<R: Rng + ?Sized>(
    nonlinearity: &ChannelModel,
    process: &ProcessSpec,
    tau_max: usize,
    rng: &mut R,
) -> Result<StationarityReport> {
    nonlinearity.validate()?;
    process.validate()?;
    if nonlinearity.noise_var() != 0.0 {
        return Err(invalid("noise_var", "stationarity check needs a noiseless nonlinearity"));
    }
    if tau_max == 0 || tau_max * 10 >= process.length {
        return Err(invalid("tau_max", "must satisfy 0 < tau_max < length / 10"));
    }
    let x = process.generate(rng);
    let y: Vec<f64> = x.iter().map(|&v| nonlinearity.deterministic_output(v)).collect();

    let deviations = lag_deviations(&x, &y, 0, x.len(), tau_max);
    let batch_len = x.len() / STATIONARITY_BATCHES;
    let batches: Vec<Vec<f64>> = (0..STATIONARITY_BATCHES)
        .map(|b| lag_deviations(&x, &y, b * batch_len, (b + 1) * batch_len, tau_max))
        .collect();
    let nb = STATIONARITY_BATCHES as f64;
    let stderrs: Vec<f64> = (0..=tau_max)
        .map(|tau| {
            let mean = batches.iter().map(|d| d[tau]).sum::<f64>() / nb;
            let var = batches.iter().map(|d| (d[tau] - mean) * (d[tau] - mean)).sum::<f64>() / (nb - 1.0);
            sqrt(var / nb)
        })
        .collect();
    let (arg, max_deviation) = deviations
        .iter()
        .map(|d| d.abs())
        .enumerate()
        .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
    Ok(StationarityReport { monte_carlo_stderr: stderrs[arg], deviations, stderrs, max_deviation })
}

// Deviation per lag using pairs (k, k + τ) with k in [start, end).
fn lag_deviations(x: &[f64], y: &[f64], start: usize, end: usize, tau_max: usize) -> Vec<f64> {
    let corr = |a: &[f64], b: &[f64], tau: usize| {
        let stop = end.min(x.len() - tau);
        let mut acc = 0.0;
        for k in start..stop {
            acc += a[k] * b[k + tau];
        }
        acc / (stop - start) as f64
    };
    let rxx0 = corr(x, x, 0);
    let rxy0 = corr(x, y, 0);
    (0..=tau_max)
        .map(|tau| {
            if tau == 0 {
                0.0
            } else {
                corr(x, y, tau) - rxy0 * (corr(x, x, tau) / rxx0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let clip = ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.0 };
        assert_eq!(clip.sample_output(2.0, &mut rng), 1.0);
        assert_eq!(ChannelModel::Awgn { noise_var: 0.0 }.sample_output(0.7, &mut rng), 0.7);
        assert_eq!(ChannelModel::SignQuantizer { noise_var: 0.0 }.sample_output(-0.3, &mut rng), -1.0);
    }

    #[test]
    fn quantizer_layout() {
        let q = ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var: 0.0 };
        let cells = q.cells().unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0].level, -1.75);
        assert_eq!(cells[7].level, 1.75);
        assert_eq!(cells[0].lower, f64::NEG_INFINITY);
        assert_eq!(cells[4].lower, 0.0);
        assert_eq!(cells[7].upper, f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(q.sample_output(0.1, &mut rng), 0.25);
        assert_eq!(q.sample_output(-0.1, &mut rng), -0.25);
        assert_eq!(q.sample_output(100.0, &mut rng), 1.75);
        assert_eq!(q.sample_output(-100.0, &mut rng), -1.75);
        assert_eq!(q.sample_output(0.5, &mut rng), 0.75);
    }

    #[test]
    fn likelihood_examples() {
        let awgn = ChannelModel::Awgn { noise_var: 0.3 };
        let peak = awgn.likelihood(0.2, 0.2).unwrap();
        assert!((peak - 1.0 / (2.0 * core::f64::consts::PI * 0.3).sqrt()).abs() < 1e-15);

        let sign = ChannelModel::SignQuantizer { noise_var: 1.0 };
        for &x in &[-2.0, -0.3, 0.0, 1.1] {
            // Φ(x) from erf
            let phi = 0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2));
            assert!((sign.likelihood(1.0, x).unwrap() - phi).abs() < 1e-15);
        }
        let hard = ChannelModel::SignQuantizer { noise_var: 0.0 };
        assert_eq!(hard.likelihood(1.0, -2.0).unwrap(), 0.0);
        assert!(matches!(hard.likelihood(0.5, 0.0), Err(Error::InvalidQuery(_))));
        assert!(ChannelModel::Awgn { noise_var: 0.0 }.likelihood(0.0, 0.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(ChannelModel::Awgn { noise_var: -1.0 }.validate().is_err());
        assert!(ChannelModel::HardClip { clip_level: 0.0, noise_var: 1.0 }.validate().is_err());
        assert!(ChannelModel::UniformQuantizer { bits: 0, step: 1.0, noise_var: 0.0 }.validate().is_err());
        assert!(ChannelModel::UniformQuantizer { bits: 2, step: -1.0, noise_var: 0.0 }.validate().is_err());
        assert!(InputSpec::new(0.0).is_err());
        assert!(InputSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn soft_limiter_inverse() {
        let h = Nonlinearity::SoftLimiter { level: 2.0 };
        for &x in &[-1.9, -0.5, 0.0, 0.3, 1.99] {
            let y = h.apply(x);
            assert!((h.noiseless_posterior_mean(y, 1.0) - x).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn stationarity_identity_and_lag_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = ProcessSpec { ar_coefficient: 0.5, length: 20_000, energy: 2.0 };
        let id = ChannelModel::Awgn { noise_var: 0.0 };
        let r = bussgang_stationarity_check(&id, &p, 5, &mut rng).unwrap();
        assert_eq!(r.deviations[0], 0.0);
        assert!(r.max_deviation < 1e-12);
        let clip = ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.0 };
        let r = bussgang_stationarity_check(&clip, &p, 5, &mut rng).unwrap();
        assert_eq!(r.deviations[0], 0.0);
    }

    #[test]
    fn stationarity_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let clip = ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.0 };
        let p = ProcessSpec { ar_coefficient: 0.5, length: 100, energy: 0.0 };
        assert!(matches!(bussgang_stationarity_check(&clip, &p, 5, &mut rng), Err(Error::Degenerate(_))));
        let p = ProcessSpec { ar_coefficient: 0.5, length: 100, energy: 1.0 };
        assert!(bussgang_stationarity_check(&clip, &p, 10, &mut rng).is_err());
        let noisy = ChannelModel::HardClip { clip_level: 1.0, noise_var: 0.1 };
        assert!(bussgang_stationarity_check(&noisy, &p, 5, &mut rng).is_err());
    }
}
