//! Monte-Carlo campaigns: BER sweeps, security gap, rate-equivocation pairs
//! and the maximum message length search.
//!
//! Every frame draws its message, shaping randomness and noise from its own
//! seeded substream, so the same seed reproduces the same rows regardless of
//! thread count, and the same noise realizations are reused across SNRs.

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{transmit_link, ChannelKind};
use crate::construction::{
    build_from_stats, construction_stats, design_distribution, leakage_at, size_and_build,
    ConstructionConfig,
};
use crate::error::{Error, Result};
use crate::mlc::{msd_decode, shaping_encode, CodeStructure, ShapingRule};
use crate::polar::CRC_LEN;
use crate::rng::{substream, Stream};
use crate::secrecy::{mutual_information, secrecy_rate, SecrecyOperatingPoint};

/// Fewer errors than this flag a row as low-confidence.
pub const MIN_ERRORS: u64 = 20;

/// Simulation knobs shared by the campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub frames: usize,
    /// Encoder list size `L_e`.
    pub list_encode: usize,
    /// Decoder list size `L_d`.
    pub list_decode: usize,
    pub rule: ShapingRule,
    pub channel: ChannelKind,
    pub seed: u64,
    pub mu: usize,
    pub mu_upgrade: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            frames: 1000,
            list_encode: 16,
            list_decode: 16,
            rule: ShapingRule::Argmax,
            channel: ChannelKind::Awgn,
            seed: 0,
            mu: 32,
            mu_upgrade: 64,
        }
    }
}

/// Error counts at one receiver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub frames: u64,
}

impl ErrorCounts {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames as f64
        }
    }

    fn add(&mut self, o: &Self) {
        self.bit_errors += o.bit_errors;
        self.bits += o.bits;
        self.frame_errors += o.frame_errors;
        self.frames += o.frames;
    }

    fn record(&mut self, sent: &[u8], got: &[u8]) {
        let e = sent.iter().zip(got).filter(|(a, b)| a != b).count() as u64;
        self.bit_errors += e;
        self.bits += sent.len() as u64;
        self.frame_errors += u64::from(e > 0);
        self.frames += 1;
    }
}

/// Runs `sim.frames` frames and decodes at Bob and, if given, at Eve. Errors
/// are counted on the message positions, CRC included.
pub fn run_frames(
    cs: &CodeStructure,
    sim: &SimConfig,
    snr_b_db: Option<f64>,
    snr_e_db: Option<f64>,
) -> Result<(ErrorCounts, ErrorCounts)> {
    let delta = cs.delta()?;
    let power = delta * delta * cs.target_dist().energy();
    let one = |f: usize| -> Result<(ErrorCounts, ErrorCounts)> {
        let f = f as u64;
        let mut msg = substream(sim.seed, f, Stream::Message);
        let payload: Vec<u8> = (0..cs.payload_len())
            .map(|_| msg.gen_range(0..2u8))
            .collect();
        let mut shaping = substream(sim.seed, f, Stream::Shaping);
        let frame = shaping_encode(cs, &payload, sim.rule, sim.list_encode, &mut shaping)?;
        let mut out = (ErrorCounts::default(), ErrorCounts::default());
        for (snr, stream, counts) in [
            (snr_b_db, Stream::Bob, &mut out.0),
            (snr_e_db, Stream::Eve, &mut out.1),
        ] {
            if let Some(snr) = snr {
                let mut rng = substream(sim.seed, f, stream);
                let obs = transmit_link(sim.channel, &frame.symbols, delta, snr, power, &mut rng);
                let dec = msd_decode(cs, &obs, sim.list_decode)?;
                counts.record(&frame.message, &dec.message);
            }
        }
        Ok(out)
    };
    let parts: Vec<(ErrorCounts, ErrorCounts)> = (0..sim.frames)
        .into_par_iter()
        .map(one)
        .collect::<Result<_>>()?;
    let mut total = (ErrorCounts::default(), ErrorCounts::default());
    for (b, e) in &parts {
        total.0.add(b);
        total.1.add(e);
    }
    Ok(total)
}

/// One row of a BER sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub snr_b_db: f64,
    pub snr_e_db: f64,
    pub frames: usize,
    pub p_e_b: f64,
    pub fer_b: f64,
    pub p_e_e: f64,
    pub l_k_e: f64,
    pub seed: u64,
    pub low_confidence: bool,
}

/// BER and leakage at each `(snr_b, snr_e)` pair.
pub fn ber_campaign(
    cs: &CodeStructure,
    sweep: &[(f64, f64)],
    sim: &SimConfig,
) -> Result<Vec<CampaignRow>> {
    sweep
        .iter()
        .map(|&(b, e)| {
            let (bob, eve) = run_frames(cs, sim, Some(b), Some(e))?;
            let l_k_e = leakage_at(cs, sim.channel, e, sim.mu, sim.mu_upgrade)?;
            let low = bob.bit_errors < MIN_ERRORS;
            if low {
                warn!(
                    "{} Bob bit errors at {b} dB; the BER is a loose estimate",
                    bob.bit_errors
                );
            }
            Ok(CampaignRow {
                snr_b_db: b,
                snr_e_db: e,
                frames: sim.frames,
                p_e_b: bob.ber(),
                fer_b: bob.fer(),
                p_e_e: eve.ber(),
                l_k_e,
                seed: sim.seed,
                low_confidence: low,
            })
        })
        .collect()
}

/// Security-gap search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub p_e_max_b: f64,
    pub l_k_max_e: f64,
    /// Search range for Bob's SNR, dB.
    pub bob_range: (f64, f64),
    /// Search range for Eve's SNR, dB.
    pub eve_range: (f64, f64),
    #[serde(default = "default_resolution")]
    pub resolution_db: f64,
}

fn default_resolution() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityGap {
    pub snr_b_min_db: f64,
    pub snr_e_max_db: f64,
    pub s_g_db: f64,
}

/// Smallest `x` in `[lo, hi]` (to `res`) with `pass(x)`, for `pass`
/// monotone non-decreasing in `x`.
fn bisect_first(
    lo: f64,
    hi: f64,
    res: f64,
    mut pass: impl FnMut(f64) -> Result<bool>,
) -> Result<f64> {
    if !pass(hi)? {
        return Err(Error::ThresholdUnreachable { lo, hi });
    }
    if pass(lo)? {
        return Ok(lo);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > res {
        let m = 0.5 * (a + b);
        if pass(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(b)
}

/// Smallest SNR in range where Bob's measured BER meets `p_e_max_b`.
pub fn bob_min_snr(cs: &CodeStructure, gap: &GapConfig, sim: &SimConfig) -> Result<f64> {
    let (lo, hi) = gap.bob_range;
    bisect_first(lo, hi, gap.resolution_db, |s| {
        let (bob, _) = run_frames(cs, sim, Some(s), None)?;
        Ok(bob.ber() <= gap.p_e_max_b)
    })
}

/// Largest SNR in range where the leakage estimate meets `l_k_max_e`.
pub fn eve_max_snr(cs: &CodeStructure, gap: &GapConfig, sim: &SimConfig) -> Result<f64> {
    let (lo, hi) = gap.eve_range;
    // mirror the range so "secure" becomes monotone non-decreasing
    let x = bisect_first(-hi, -lo, gap.resolution_db, |s| {
        Ok(leakage_at(cs, sim.channel, -s, sim.mu, sim.mu_upgrade)? <= gap.l_k_max_e)
    })?;
    Ok(-x)
}

/// `S_g = SNR_B,min - SNR_E,max` in dB.
pub fn security_gap(cs: &CodeStructure, gap: &GapConfig, sim: &SimConfig) -> Result<SecurityGap> {
    let b = bob_min_snr(cs, gap, sim)?;
    let e = eve_max_snr(cs, gap, sim)?;
    Ok(SecurityGap {
        snr_b_min_db: b,
        snr_e_max_db: e,
        s_g_db: b - e,
    })
}

/// One `(R_t, R̄_e)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub k: usize,
    /// `K / N`.
    pub r_t: f64,
    pub l_k_e: f64,
    /// `1 - L_k^E`.
    pub r_e_bar: f64,
    /// `R_t (1 - L_k^E)`.
    pub r_e: f64,
}

/// Boundary of the achievable region for the design distribution, in bits
/// per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub i_xy: f64,
    pub i_xz: f64,
    pub r_s: f64,
}

impl RegionBoundary {
    /// Whether `(r_t, r_e)` (bits per symbol) lies inside the region.
    pub fn contains(&self, r_t: f64, r_e: f64) -> bool {
        r_e <= r_t && r_t <= self.i_xy && (0.0..=self.r_s).contains(&r_e)
    }
}

/// Constructs with each forced `(N, K)` and reports the rate pairs.
pub fn rate_equivocation_curve(
    base: &ConstructionConfig,
    sizes: &[(usize, usize)],
) -> Result<(Vec<RatePoint>, RegionBoundary)> {
    let (dist, _) = design_distribution(base)?;
    let (b, e) = base.design_snrs();
    let op = SecrecyOperatingPoint {
        snr_b_db: b,
        snr_e_db: e,
        power: base.power,
    };
    let boundary = RegionBoundary {
        i_xy: mutual_information(&dist, b)?,
        i_xz: mutual_information(&dist, e)?,
        r_s: secrecy_rate(&dist, &op)?,
    };
    let points = sizes
        .iter()
        .map(|&(n, k)| {
            let mut cfg = base.clone();
            cfg.n = n;
            cfg.forced_k = Some(k);
            let c = size_and_build(&cfg)?;
            let r_t = k as f64 / n as f64;
            Ok(RatePoint {
                n,
                k,
                r_t,
                l_k_e: c.leakage,
                r_e_bar: 1.0 - c.leakage,
                r_e: r_t * (1.0 - c.leakage),
            })
        })
        .collect::<Result<_>>()?;
    Ok((points, boundary))
}

/// Maximum-K search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxKConfig {
    pub orders: Vec<usize>,
    pub snr_grid_db: Vec<f64>,
    pub s_g_db: f64,
    pub p_e_max_b: f64,
    pub l_k_max_e: f64,
    pub n: usize,
    /// `kappa_D` per entry of `orders`; defaults to 1.
    #[serde(default)]
    pub kappa_d: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxKRow {
    #[serde(rename = "Q")]
    pub order: usize,
    pub snr_b_db: f64,
    pub shaped: bool,
    pub max_k: usize,
}

/// Largest `K` meeting reliability at `SNR_B` and the leakage bound at
/// `SNR_B - S_g`. With `sim.frames == 0` reliability is judged by the union
/// bound, otherwise by a measured BER.
pub fn max_k_search(cfg: &MaxKConfig, sim: &SimConfig) -> Result<Vec<MaxKRow>> {
    let mut rows = Vec::new();
    for (qi, &order) in cfg.orders.iter().enumerate() {
        for &snr in &cfg.snr_grid_db {
            for shaped in [true, false] {
                let mut c = ConstructionConfig::new(
                    cfg.n,
                    order,
                    snr,
                    cfg.s_g_db,
                    cfg.p_e_max_b,
                    cfg.l_k_max_e,
                );
                c.kappa_d = cfg.kappa_d.get(qi).copied().unwrap_or(1.0);
                c.shaped = shaped;
                c.channel = sim.channel;
                c.mu = sim.mu;
                c.mu_upgrade = sim.mu_upgrade;
                c.seed = sim.seed;
                let max_k = max_k_point(&c, sim)?;
                rows.push(MaxKRow {
                    order,
                    snr_b_db: snr,
                    shaped,
                    max_k,
                });
            }
        }
    }
    Ok(rows)
}

fn max_k_point(cfg: &ConstructionConfig, sim: &SimConfig) -> Result<usize> {
    cfg.validate()?;
    let (dist, design) = design_distribution(cfg)?;
    let stats = construction_stats(cfg, &dist, design)?;
    let feasible = |k: usize| -> Result<bool> {
        let mut c = cfg.clone();
        c.forced_k = Some(k);
        let built = match build_from_stats(&c, dist.clone(), design, stats.clone()) {
            Ok(b) => b,
            Err(Error::InvalidArgument(_)) => return Ok(false),
            Err(e) => return Err(e),
        };
        if built.leakage > cfg.l_k_max_e {
            return Ok(false);
        }
        if sim.frames == 0 {
            return Ok(built.union_bound <= cfg.p_e_max_b);
        }
        let (bob, _) = run_frames(&built.structure, sim, Some(cfg.d_snr_b_db), None)?;
        Ok(bob.ber() <= cfg.p_e_max_b)
    };
    let top = cfg.n * stats.q;
    if !feasible(CRC_LEN)? {
        return Ok(0);
    }
    // invariant: lo feasible, hi infeasible
    let (mut lo, mut hi) = (CRC_LEN, top + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
