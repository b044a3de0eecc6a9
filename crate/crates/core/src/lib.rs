//! Probabilistically shaped multilevel polar coding for the Gaussian and
//! Rayleigh-fading wiretap channels.
//!
//! The crate is organised bottom-up:
//!
//! * [`constellation`]: labelled ASK/QAM sets and Maxwell-Boltzmann shaping.
//! * [`secrecy`]: mutual information, secrecy rates and the scaling search.
//! * [`polar`]: the polar transform, SC/SCL decoding and the CRC-8 outer code.
//! * [`channels`]: AWGN/Rayleigh wiretap simulation.
//! * [`mlc`]: shaped multilevel encoding and multistage list decoding.
//! * [`construction`]: bit-channel statistics, set selection and sizing.
//! * [`harness`]: Monte-Carlo campaigns (BER, security gap, rate-equivocation).

pub mod channels;
pub mod constellation;
pub mod construction;
pub mod error;
pub mod harness;
pub mod mlc;
pub mod polar;
pub mod quadrature;
pub mod rng;
pub mod secrecy;

pub use error::{Error, Result};

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}
