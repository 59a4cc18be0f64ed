//! Super-symbol rates for linear-Gaussian block channels.
//!
//! Each length-L block sees y = H·x + z with H the lower-triangular banded
//! convolution matrix of the impulse response (no inter-block spill). The
//! normalized MMSE is tr((I/E_s + HᵀH/σ²)⁻¹)/L, computed from a banded
//! Cholesky factor; its L → ∞ limit is the spectral integral
//! (1/2π)∫ E_s σ²/(E_s|Ĥ(ω)|² + σ²) dω.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::gmi::{gmi_via_theta_sup, ThetaObjective};
use crate::math::{ln, sqrt};

pub const MAX_BLOCK_LENGTH: usize = 4096;
const SPECTRAL_POINTS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockLinearChannel {
    impulse_response: Vec<f64>,
    noise_var: f64,
    block_length: usize,
    energy: f64,
}

impl BlockLinearChannel {
    pub fn new(impulse_response: Vec<f64>, noise_var: f64, block_length: usize, energy: f64) -> Result<Self> {
        if impulse_response.is_empty() || impulse_response.iter().all(|&h| h == 0.0) {
            return Err(invalid("impulse_response", "must have a nonzero tap"));
        }
        if impulse_response.iter().any(|h| !h.is_finite()) {
            return Err(invalid("impulse_response", "taps must be finite"));
        }
        if block_length == 0 {
            return Err(invalid("block_length", "must be positive"));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(invalid("noise_var", "must be finite and > 0"));
        }
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(invalid("energy", "must be finite and > 0"));
        }
        Ok(Self { impulse_response, noise_var, block_length, energy })
    }

    pub fn impulse_response(&self) -> &[f64] {
        &self.impulse_response
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Within-block convolution H·x.
    pub fn convolve(&self, x: &[f64]) -> Vec<f64> {
        let h = &self.impulse_response;
        (0..x.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(h.len());
                (lo..=i).map(|k| h[i - k] * x[k]).sum()
            })
            .collect()
    }

    /// One noisy block output.
    pub fn sample_block<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let sd = sqrt(self.noise_var);
        let mut y = self.convolve(x);
        for v in &mut y {
            let t: f64 = StandardNormal.sample(rng);
            *v += sd * t;
        }
        y
    }

    /// Banded Cholesky factor of the posterior precision I/E_s + HᵀH/σ².
    pub fn estimator(&self) -> Result<BlockEstimator> {
        if self.block_length > MAX_BLOCK_LENGTH {
            return Err(invalid("block_length", alloc::format!("exceeds {MAX_BLOCK_LENGTH}")));
        }
        let n = self.block_length;
        // taps past the block never act on it
        let h = &self.impulse_response[..self.impulse_response.len().min(n)];
        let p = h.len() - 1;
        // (HᵀH)_{i,i−d} = Σ_r h_{r−i} h_{r−i+d} over rows r inside the block
        let mut band = vec![vec![0.0; p + 1]; n];
        for (i, row) in band.iter_mut().enumerate() {
            for (d, entry) in row.iter_mut().enumerate().take(p.min(i) + 1) {
                let j = i - d;
                let mut acc = 0.0;
                for r in i..n.min(j + h.len()) {
                    acc += h[r - i] * h[r - j];
                }
                *entry = acc / self.noise_var;
            }
            row[0] += 1.0 / self.energy;
        }
        let factor = banded_cholesky(&band, p)?;
        let scale = band.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = banded_residual(&band, &factor, p);
        if residual > 1e-10 * scale {
            return Err(Error::NonConvergence { quantity: "cholesky residual", coarse: residual, fine: 0.0 });
        }
        Ok(BlockEstimator { channel: self.clone(), factor, bandwidth: p })
    }
}

/// Conditional-mean estimator E[x|y] for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEstimator {
    channel: BlockLinearChannel,
    /// factor[i][d] = L_{i, i−d}
    factor: Vec<Vec<f64>>,
    bandwidth: usize,
}

impl BlockEstimator {
    /// (1/L)·E‖x − E[x|y]‖²
    pub fn normalized_mmse(&self) -> f64 {
        let n = self.factor.len();
        let p = self.bandwidth;
        let mut trace = 0.0;
        let mut v = vec![0.0; n];
        for j in 0..n {
            // L v = e_j, rows below j only
            for i in j..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in j.max(i.saturating_sub(p))..i {
                    s -= self.factor[i][i - k] * v[k];
                }
                v[i] = s / self.factor[i][0];
                trace += v[i] * v[i];
            }
        }
        trace / n as f64
    }

    /// E[x|y] = (I/E_s + HᵀH/σ²)⁻¹ Hᵀy/σ²
    pub fn conditional_mean(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.factor.len();
        if y.len() != n {
            return Err(invalid("y", "length must equal the block length"));
        }
        let h = &self.channel.impulse_response;
        let p = self.bandwidth;
        let mut b: Vec<f64> = (0..n)
            .map(|k| (k..n.min(k + h.len())).map(|r| h[r - k] * y[r]).sum::<f64>() / self.channel.noise_var)
            .collect();
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(p)..i {
                s -= self.factor[i][i - k] * b[k];
            }
            b[i] = s / self.factor[i][0];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n.min(i + p + 1) {
                s -= self.factor[k][k - i] * b[k];
            }
            b[i] = s / self.factor[i][0];
        }
        Ok(b)
    }
}

fn banded_cholesky(band: &[Vec<f64>], p: usize) -> Result<Vec<Vec<f64>>> {
    let n = band.len();
    let mut l = vec![vec![0.0; p + 1]; n];
    for i in 0..n {
        let start = i.saturating_sub(p);
        for j in start..=i {
            let mut s = band[i][i - j];
            for k in start.max(j.saturating_sub(p))..j {
                s -= l[i][i - k] * l[j][j - k];
            }
            if i == j {
                if !(s > f64::MIN_POSITIVE * 1e10) || !s.is_finite() {
                    return Err(Error::Singular { pivot: i });
                }
                l[i][0] = sqrt(s);
            } else {
                l[i][i - j] = s / l[j][0];
            }
        }
    }
    Ok(l)
}

fn banded_residual(band: &[Vec<f64>], l: &[Vec<f64>], p: usize) -> f64 {
    let n = band.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i.saturating_sub(p)..=i {
            let mut s = 0.0;
            for k in i.saturating_sub(p)..=j {
                if j - k <= p {
                    s += l[i][i - k] * l[j][j - k];
                }
            }
            worst = worst.max((s - band[i][i - j]).abs());
        }
    }
    worst
}

/// mmse_L for the channel.
pub fn toeplitz_mmse(ch: &BlockLinearChannel) -> Result<f64> {
    Ok(ch.estimator()?.normalized_mmse())
}

/// L → ∞ limit of mmse_L by the periodic trapezoidal rule, doubled from
/// 4096 points until successive values agree to 1e-10.
pub fn spectral_mmse_limit(impulse_response: &[f64], noise_var: f64, energy: f64) -> Result<f64> {
    if impulse_response.is_empty() || impulse_response.iter().all(|&h| h == 0.0) {
        return Err(invalid("impulse_response", "must have a nonzero tap"));
    }
    if !(noise_var > 0.0) || !(energy > 0.0) {
        return Err(invalid("noise_var", "noise and energy must be positive"));
    }
    let eval = |points: usize| {
        let mut acc = 0.0;
        for k in 0..points {
            let w = 2.0 * core::f64::consts::PI * k as f64 / points as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &h) in impulse_response.iter().enumerate() {
                re += h * libm::cos(w * t as f64);
                im -= h * libm::sin(w * t as f64);
            }
            acc += energy * noise_var / (energy * (re * re + im * im) + noise_var);
        }
        acc / points as f64
    };
    let mut points = SPECTRAL_POINTS;
    let mut prev = eval(points);
    while points < (1 << 22) {
        points *= 2;
        let next = eval(points);
        if (next - prev).abs() <= 1e-10 {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockReport {
    pub block_length: usize,
    pub mmse_l: f64,
    pub gmi_l_nats: f64,
    pub spectral_mmse: f64,
    pub spectral_gmi_nats: f64,
    /// Numeric θ-supremum with g = E[x|y] and a = a_opt.
    pub theta_sup_gmi_nats: f64,
}

fn rate_from_mmse(energy: f64, mmse: f64) -> f64 {
    // ½ ln(1 + (E_s − mmse)/mmse)
    0.5 * ln(energy / mmse)
}

pub fn block_gmi(ch: &BlockLinearChannel) -> Result<BlockReport> {
    let energy = ch.energy;
    let mmse_l = toeplitz_mmse(ch)?;
    let spectral_mmse = spectral_mmse_limit(&ch.impulse_response, ch.noise_var, energy)?;
    // with g the conditional mean, E[xᵀg]/L = E[‖g‖²]/L = E_s − mmse_L
    let cond_power = energy - mmse_l;
    let a_opt = cond_power / energy;
    let obj = ThetaObjective::from_moments(energy, a_opt, cond_power, cond_power);
    Ok(BlockReport {
        block_length: ch.block_length,
        mmse_l,
        gmi_l_nats: rate_from_mmse(energy, mmse_l),
        spectral_mmse,
        spectral_gmi_nats: rate_from_mmse(energy, spectral_mmse),
        theta_sup_gmi_nats: gmi_via_theta_sup(&obj)?,
    })
}

/// (1/n)·Σ_k ‖g(y_k) − a·x_k‖² over the n blocks of length `block_length`.
pub fn block_nn_metric<G: FnMut(&[f64]) -> Vec<f64>>(
    received: &[f64],
    candidate: &[f64],
    block_length: usize,
    a: f64,
    mut front_end: G,
) -> Result<f64> {
    if received.len() != candidate.len() {
        return Err(invalid("candidate", "length differs from the received sequence"));
    }
    if block_length == 0 || !received.len().is_multiple_of(block_length) || received.is_empty() {
        return Err(invalid("block_length", "must divide the sequence length"));
    }
    let blocks = received.len() / block_length;
    let mut acc = 0.0;
    for (y, x) in received.chunks(block_length).zip(candidate.chunks(block_length)) {
        let g = front_end(y);
        if g.len() != block_length {
            return Err(invalid("front_end", "must preserve the block length"));
        }
        acc += g.iter().zip(x).map(|(gi, xi)| (gi - a * xi) * (gi - a * xi)).sum::<f64>();
    }
    Ok(acc / blocks as f64)
}
