//! Achievable information rates for Gaussian-input transmission through
//! nonlinear transceiver distortion under nearest-neighbor decoding.
//!
//! The crate is `no_std` (with `alloc`). Every expectation is model based:
//! quantizer channels use exact Gaussian cell sums, analog channels use
//! Gauss-Hermite and composite Gauss-Legendre rules against the Gaussian
//! measure. Randomness is always supplied by the caller.
//!
//! Module map:
//!
//! * [`channels`]: memoryless distortion channels, exact sampling and likelihoods,
//!   and the stationary-process correlation check.
//! * [`quadrature`]: Gaussian-expectation engine.
//! * [`estimators`]: moments, the linear and conditional-mean front ends.
//! * [`gmi`]: rates, effective SNRs, optimal scaling, the θ-supremum objective.
//! * [`blockmem`]: super-symbol rates for linear-Gaussian block channels.
//! * [`linksim`]: random-coding link simulation with nearest-neighbor decoding.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::redundant_guards)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod blockmem;
pub mod channels;
mod error;
pub mod estimators;
pub mod gmi;
pub mod linksim;
mod math;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};

pub use channels::{ChannelModel, InputSpec, Nonlinearity, OutputAlphabet, ProcessSpec};
pub use estimators::{compute_moments, FrontEnd, MomentReport, QuadConfig};
pub use gmi::GmiReport;
