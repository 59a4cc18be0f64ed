#![allow(dead_code)]

use gmi_core::{ChannelModel, InputSpec, Nonlinearity};

pub fn input(energy: f64) -> InputSpec {
    InputSpec::new(energy).unwrap()
}

/// Noisy corpus at the given noise variance.
pub fn corpus(noise_var: f64) -> Vec<ChannelModel> {
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
        ChannelModel::UniformQuantizer { bits: 1, step: 1.0, noise_var },
        ChannelModel::UniformQuantizer { bits: 2, step: 0.8, noise_var },
        ChannelModel::UniformQuantizer { bits: 3, step: 0.5, noise_var },
        ChannelModel::UniformQuantizer { bits: 5, step: 0.1, noise_var },
    ]
}

pub fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(1e-300)
}
