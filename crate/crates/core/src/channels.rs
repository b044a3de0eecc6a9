//! Wiretap channel pair simulation and the Rayleigh-to-AWGN equivalent SNR.
//!
//! Symbols are complex (real for ASK) and scaled by `delta`. Noise is
//! circularly-symmetric complex Gaussian with total variance `P / SNR`.
//! Rayleigh links draw an independent `h ~ CN(0, 1)` per symbol and hand the
//! gains to the receiver.

use log::warn;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constellation::ShapedDistribution;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::secrecy::mutual_information;
use crate::{db_to_linear, linear_to_db};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    #[serde(rename = "AWGN", alias = "awgn")]
    Awgn,
    #[serde(rename = "Rayleigh", alias = "rayleigh")]
    Rayleigh,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(Self::Awgn),
            "rayleigh" => Ok(Self::Rayleigh),
            _ => Err(Error::InvalidArgument(format!("unknown channel kind {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WiretapPair {
    pub kind: ChannelKind,
    pub snr_b_db: f64,
    pub snr_e_db: f64,
    pub power: f64,
}

impl WiretapPair {
    pub fn new(kind: ChannelKind, snr_b_db: f64, snr_e_db: f64, power: f64) -> Self {
        if kind == ChannelKind::Awgn && snr_b_db <= snr_e_db {
            warn!("eavesdropper SNR {snr_e_db} dB is not below the legitimate SNR {snr_b_db} dB");
        }
        Self {
            kind,
            snr_b_db,
            snr_e_db,
            power,
        }
    }
}

/// What one receiver sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: Vec<Complex64>,
    /// Per-symbol fading gains, absent on AWGN links.
    pub gains: Option<Vec<Complex64>>,
    pub noise_var: f64,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// One link: `y = h delta x + n` with `sigma^2 = power / SNR`.
pub fn transmit_link<R: Rng + ?Sized>(
    kind: ChannelKind,
    symbols: &[Complex64],
    delta: f64,
    snr_db: f64,
    power: f64,
    rng: &mut R,
) -> Observation {
    let noise_var = power / db_to_linear(snr_db);
    let gains: Option<Vec<Complex64>> = match kind {
        ChannelKind::Awgn => None,
        ChannelKind::Rayleigh => Some(
            (0..symbols.len())
                .map(|_| complex_gaussian(rng, 1.0))
                .collect(),
        ),
    };
    let y = symbols
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let h = gains.as_ref().map_or(Complex64::new(1.0, 0.0), |g| g[k]);
            let n = if noise_var > 0.0 {
                complex_gaussian(rng, noise_var)
            } else {
                Complex64::new(0.0, 0.0)
            };
            h * x * delta + n
        })
        .collect();
    Observation {
        y,
        gains,
        noise_var,
    }
}

/// Sends `symbols` to Bob and Eve with independent noise and fading.
pub fn transmit<R: Rng + ?Sized>(
    pair: &WiretapPair,
    symbols: &[Complex64],
    delta: f64,
    bob_rng: &mut R,
    eve_rng: &mut R,
) -> (Observation, Observation) {
    (
        transmit_link(
            pair.kind,
            symbols,
            delta,
            pair.snr_b_db,
            pair.power,
            bob_rng,
        ),
        transmit_link(
            pair.kind,
            symbols,
            delta,
            pair.snr_e_db,
            pair.power,
            eve_rng,
        ),
    )
}

const RESIDUAL_TOL: f64 = 1e-5;

/// Ergodic rate `E_h[I(dist, |h|^2 SNR)]` for `|h|^2 ~ Exp(1)`.
pub fn ergodic_rate(dist: &ShapedDistribution, snr_db: f64) -> Result<f64> {
    // u = 1 - e^{-g} is uniform; panels crowd near both ends
    let edges = [
        0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99, 0.999, 0.9999, 1.0,
    ];
    let rule = gauss_legendre(24);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            let u: f64 = a + half * (t + 1.0);
            let g = -(-u).ln_1p();
            total += half * wt * mutual_information(dist, snr_db + linear_to_db(g))?;
        }
    }
    Ok(total)
}

/// AWGN SNR with the same rate as the Rayleigh link at `snr_db`.
pub fn rayleigh_equivalent_awgn_snr(snr_db: f64, dist: &ShapedDistribution) -> Result<f64> {
    if snr_db == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("snr {snr_db} dB")));
    }
    let target = ergodic_rate(dist, snr_db)?;
    let rate = |s: f64| mutual_information(dist, s);
    let (mut lo, mut hi) = (snr_db - 80.0, snr_db);
    if rate(lo)? > target || rate(hi)? < target {
        return Err(Error::NoConvergence { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid)?;
        if (r - target).abs() < RESIDUAL_TOL && hi - lo < 1e-6 {
            return Ok(mid);
        }
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (rate(mid)? - target).abs() > 1e-4 {
        return Err(Error::NoConvergence { lo, hi });
    }
    Ok(mid)
}
