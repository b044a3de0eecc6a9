//! Security-oriented construction of shaped multilevel polar codes.
//!
//! Bit-channel statistics come from a quantized recursion over symmetrized
//! level channels (degrading and upgrading merges) or from genie-aided
//! Monte-Carlo decoding. Positions are then split into frozen, shaping,
//! random and message sets, and the sizes are chosen against a union bound
//! on Bob's block error rate and a capacity bound on Eve's leakage.

mod bms;
mod joint;
mod surrogate;

pub use bms::{crossover_from_llr, polarize, Approx, BscMixture};
pub use joint::{zb_parameter, DiscreteJoint};
pub use surrogate::{awgn_level_channel, source_channel};

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary_entropy;
use crate::channels::{rayleigh_equivalent_awgn_snr, transmit_link, ChannelKind};
use crate::constellation::{Constellation, Scheme, ShapedDistribution};
use crate::error::{Error, Result};
use crate::mlc::{bitlevel_demap, CodeStructure};
use crate::polar::{hard_decision, log2_len, polar_transform, ScDecoder, CRC_LEN};
use crate::rng::{substream, Stream};
use crate::secrecy::{optimal_distribution, SecrecyOperatingPoint};

/// Per-position statistics, indexed `[level][index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitChannelStats {
    pub n: usize,
    pub q: usize,
    /// Estimate of `H(U | V)` without the channel.
    pub h_source: Vec<Vec<f64>>,
    /// Genie-aided error rate at Bob.
    pub eps_bob: Vec<Vec<f64>>,
    /// Genie-aided error rate at Eve.
    pub eps_eve: Vec<Vec<f64>>,
    /// Upper estimate of what Eve's bit-channel carries, `H(U | V) - H(U | V, Z)`;
    /// the channel capacity when the input is uniform.
    pub cap_eve: Vec<Vec<f64>>,
}

/// One CSV row of [`BitChannelStats`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub l: usize,
    pub i: usize,
    pub h_source: f64,
    pub eps_bob: f64,
    pub eps_eve: f64,
    pub cap_eve: f64,
}

impl BitChannelStats {
    pub fn rows(&self) -> Vec<StatsRow> {
        let mut out = Vec::with_capacity(self.n * self.q);
        for l in 0..self.q {
            for i in 0..self.n {
                out.push(StatsRow {
                    l,
                    i,
                    h_source: self.h_source[l][i],
                    eps_bob: self.eps_bob[l][i],
                    eps_eve: self.eps_eve[l][i],
                    cap_eve: self.cap_eve[l][i],
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Quantized recursion over the symmetrized level channels.
    #[default]
    #[serde(alias = "tal-vardy")]
    DensityEvolution,
    /// Genie-aided Monte-Carlo decoding.
    MonteCarlo,
}

/// SNRs the statistics are computed at, as equivalent AWGN SNRs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub snr_b_db: f64,
    pub snr_e_db: f64,
}

/// Quantized-recursion statistics for `dist` scaled by `delta`.
pub fn density_evolution_stats(
    dist: &ShapedDistribution,
    delta: f64,
    design: DesignPoint,
    n: usize,
    mu: usize,
    mu_upgrade: usize,
) -> Result<BitChannelStats> {
    log2_len(n)?;
    let q = dist.constellation().bits();
    let per_level: Vec<Result<[Vec<f64>; 4]>> = (0..q)
        .into_par_iter()
        .map(|l| {
            let src = polarize(&source_channel(dist, l)?, n, mu, Approx::Degrading)?;
            let bob = polarize(
                &awgn_level_channel(dist, delta, design.snr_b_db, l)?,
                n,
                mu,
                Approx::Degrading,
            )?;
            let eve_base = awgn_level_channel(dist, delta, design.snr_e_db, l)?;
            let eve = polarize(&eve_base, n, mu, Approx::Degrading)?;
            let eve_up = leak_bounds(&src, &eve_base, design.snr_e_db, n, mu_upgrade)?;
            Ok([
                src.iter().map(|c| c.entropy()).collect(),
                bob.iter().map(|c| c.error_probability().min(0.5)).collect(),
                eve.iter().map(|c| c.error_probability().min(0.5)).collect(),
                eve_up,
            ])
        })
        .collect();
    let mut stats = BitChannelStats {
        n,
        q,
        h_source: Vec::with_capacity(q),
        eps_bob: Vec::with_capacity(q),
        eps_eve: Vec::with_capacity(q),
        cap_eve: Vec::with_capacity(q),
    };
    for r in per_level {
        let [h, b, e, c] = r?;
        stats.h_source.push(h);
        stats.eps_bob.push(b);
        stats.eps_eve.push(e);
        stats.cap_eve.push(c);
    }
    Ok(stats)
}

/// `H(U|V) - H(U|V,Z)` per position: degraded source entropies minus
/// upgraded Eve entropies.
fn leak_bounds(
    src: &[BscMixture],
    eve_base: &BscMixture,
    snr_e_db: f64,
    n: usize,
    mu_upgrade: usize,
) -> Result<Vec<f64>> {
    if snr_e_db == f64::NEG_INFINITY {
        return Ok(vec![0.0; n]);
    }
    let eve = polarize(eve_base, n, mu_upgrade, Approx::Upgrading)?;
    Ok(src
        .iter()
        .zip(&eve)
        .map(|(s, e)| (s.entropy() - e.entropy()).clamp(0.0, 1.0))
        .collect())
}

/// Eve's per-position leakage bounds at one SNR.
pub fn eve_capacities(
    dist: &ShapedDistribution,
    delta: f64,
    snr_e_db: f64,
    n: usize,
    mu: usize,
    mu_upgrade: usize,
) -> Result<Vec<Vec<f64>>> {
    let q = dist.constellation().bits();
    (0..q)
        .into_par_iter()
        .map(|l| {
            let src = polarize(&source_channel(dist, l)?, n, mu, Approx::Degrading)?;
            let base = awgn_level_channel(dist, delta, snr_e_db, l)?;
            leak_bounds(&src, &base, snr_e_db, n, mu_upgrade)
        })
        .collect()
}

const CI_WARN: f64 = 0.05;
const MC_CHUNK: usize = 64;

/// Genie-aided Monte-Carlo statistics over `frames` i.i.d. label blocks.
///
/// Labels are drawn from `dist`, which matches randomized rounding at every
/// position. `h_source` and `cap_eve` come from the mean binary entropy of
/// the successive source and Eve posteriors; the error rates count decisions that differ
/// from the true bits, with the truth fed back before moving on.
pub fn mc_entropy_profile(
    dist: &ShapedDistribution,
    delta: f64,
    kind: ChannelKind,
    snr_b_db: f64,
    snr_e_db: f64,
    n: usize,
    frames: usize,
    seed: u64,
) -> Result<BitChannelStats> {
    log2_len(n)?;
    if frames == 0 {
        return Err(Error::InvalidArgument("frames must be positive".into()));
    }
    let c = dist.constellation();
    let q = c.bits();
    let power = delta * delta * dist.energy();
    let pmf = dist.pmf();
    let cdf: Vec<f64> = pmf
        .iter()
        .scan(0.0, |s, p| {
            *s += p;
            Some(*s)
        })
        .collect();
    let priors: Vec<Vec<f64>> = (0..q)
        .map(|l| {
            (0..1usize << l)
                .map(|lower| {
                    let p0 = dist.level_zero_probability(l, lower);
                    (p0 / (1.0 - p0)).ln()
                })
                .collect()
        })
        .collect();
    // [h_source, err_bob, err_eve, h_eve] sums per position
    let zero = || vec![vec![[0.0f64; 4]; n]; q];
    let chunks = frames.div_ceil(MC_CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|ch| -> Result<_> {
            let mut acc = zero();
            for f in ch * MC_CHUNK..((ch + 1) * MC_CHUNK).min(frames) {
                let mut rng = substream(seed, f as u64, Stream::Construction);
                let labels: Vec<usize> = (0..n)
                    .map(|_| {
                        let v: f64 = rng.gen();
                        cdf.iter().position(|&c| v < c).unwrap_or(pmf.len() - 1)
                    })
                    .collect();
                let symbols: Vec<_> = labels.iter().map(|&k| c.point(k)).collect();
                let obs_b = transmit_link(
                    kind,
                    &symbols,
                    delta,
                    snr_b_db,
                    power,
                    &mut substream(seed, f as u64, Stream::Bob),
                );
                let obs_e = transmit_link(
                    kind,
                    &symbols,
                    delta,
                    snr_e_db,
                    power,
                    &mut substream(seed, f as u64, Stream::Eve),
                );
                let mut sc = ScDecoder::new(n)?;
                let mut u_hat = vec![0u8; n];
                for l in 0..q {
                    let lower: Vec<usize> = labels.iter().map(|&k| k & ((1 << l) - 1)).collect();
                    let x: Vec<u8> = labels.iter().map(|&k| ((k >> l) & 1) as u8).collect();
                    let u = polar_transform(&x)?;
                    let src: Vec<f64> = lower.iter().map(|&lo| priors[l][lo]).collect();
                    let row = &mut acc[l];
                    sc.decode(&src, &mut u_hat, |i, llr| {
                        row[i][0] += posterior_entropy(llr);
                        u[i]
                    })?;
                    let llr_b = channel_llrs(c, delta, l, &lower, &obs_b, pmf)?;
                    sc.decode(&llr_b, &mut u_hat, |i, llr| {
                        row[i][1] += f64::from(hard_decision(llr) != u[i]);
                        u[i]
                    })?;
                    let llr_e = channel_llrs(c, delta, l, &lower, &obs_e, pmf)?;
                    sc.decode(&llr_e, &mut u_hat, |i, llr| {
                        row[i][2] += f64::from(hard_decision(llr) != u[i]);
                        row[i][3] += posterior_entropy(llr);
                        u[i]
                    })?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    // chunk order fixes the summation order
    let mut sums = zero();
    for part in partial {
        for (ra, rb) in sums.iter_mut().zip(part) {
            for (x, y) in ra.iter_mut().zip(rb) {
                for k in 0..4 {
                    x[k] += y[k];
                }
            }
        }
    }
    let m = frames as f64;
    let pick = |k: usize, f: fn(f64) -> f64| -> Vec<Vec<f64>> {
        sums.iter()
            .map(|row| row.iter().map(|s| f(s[k] / m)).collect())
            .collect()
    };
    let stats = BitChannelStats {
        n,
        q,
        h_source: pick(0, |x| x.clamp(0.0, 1.0)),
        eps_bob: pick(1, |x| x.min(0.5)),
        eps_eve: pick(2, |x| x.min(0.5)),
        cap_eve: sums
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| ((s[0] - s[3]) / m).clamp(0.0, 1.0))
                    .collect()
            })
            .collect(),
    };
    let worst = stats
        .eps_bob
        .iter()
        .chain(&stats.eps_eve)
        .flatten()
        .map(|&p| 1.96 * (p * (1.0 - p) / m).sqrt())
        .fold(0.0, f64::max);
    if worst > CI_WARN {
        warn!("{frames} frames leave a 95% interval of +-{worst:.3} on some error rates");
    }
    Ok(stats)
}

fn posterior_entropy(llr: f64) -> f64 {
    binary_entropy(1.0 / (1.0 + llr.exp()))
}

fn channel_llrs(
    c: &Constellation,
    delta: f64,
    level: usize,
    lower: &[usize],
    obs: &crate::channels::Observation,
    pmf: &[f64],
) -> Result<Vec<f64>> {
    if obs.noise_var > 0.0 {
        bitlevel_demap(c, delta, level, lower, obs, Some(pmf))
    } else {
        // noiseless: the observation pins the label
        Ok(obs
            .y
            .iter()
            .map(|y| {
                let k = c
                    .points()
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        (y - a.1 * delta)
                            .norm_sqr()
                            .total_cmp(&(y - b.1 * delta).norm_sqr())
                    })
                    .map_or(0, |p| p.0);
                if (k >> level) & 1 == 0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect())
    }
}

/// Position sets `(F, A, R, D)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PositionSets {
    pub f: Vec<(usize, usize)>,
    pub a: Vec<(usize, usize)>,
    pub r: Vec<(usize, usize)>,
    pub d: Vec<(usize, usize)>,
}

/// Takes `count` positions from `pool` ordered by `key` (ascending unless
/// `highest`), ties broken by `(level, index)`, and removes them.
fn take(
    pool: &mut Vec<(usize, usize)>,
    count: usize,
    key: &[Vec<f64>],
    highest: bool,
) -> Vec<(usize, usize)> {
    pool.sort_by(|a, b| {
        let (x, y) = (key[a.0][a.1], key[b.0][b.1]);
        let o = if highest {
            y.total_cmp(&x)
        } else {
            x.total_cmp(&y)
        };
        o.then(a.cmp(b))
    });
    let mut picked: Vec<(usize, usize)> = pool.drain(..count).collect();
    picked.sort();
    picked
}

/// `F` = highest `eps_bob`, then `D` = lowest `h_source`, then `R` = lowest
/// `eps_eve`; the remainder is `A`.
pub fn select_sets(
    stats: &BitChannelStats,
    k: usize,
    r: usize,
    d: usize,
    f: usize,
) -> Result<PositionSets> {
    let total = stats.n * stats.q;
    if k + r + d + f != total {
        return Err(Error::SizeMismatch {
            sum: k + r + d + f,
            total,
        });
    }
    let mut pool: Vec<(usize, usize)> = (0..stats.q)
        .flat_map(|l| (0..stats.n).map(move |i| (l, i)))
        .collect();
    let f_set = take(&mut pool, f, &stats.eps_bob, true);
    let d_set = take(&mut pool, d, &stats.h_source, false);
    let r_set = take(&mut pool, r, &stats.eps_eve, false);
    pool.sort();
    Ok(PositionSets {
        f: f_set,
        a: pool,
        r: r_set,
        d: d_set,
    })
}

/// Mean of Eve's capacity bounds over the message positions.
pub fn leakage_estimate(a_set: &[(usize, usize)], cap_eve: &[Vec<f64>]) -> f64 {
    if a_set.is_empty() {
        return 0.0;
    }
    a_set.iter().map(|&(l, i)| cap_eve[l][i]).sum::<f64>() / a_set.len() as f64
}

fn default_scheme() -> Scheme {
    Scheme::Ask
}
fn default_kappa() -> f64 {
    1.0
}
fn default_mu() -> usize {
    32
}
fn default_mu_upgrade() -> usize {
    64
}
fn default_mc_frames() -> usize {
    10_000
}
fn default_true() -> bool {
    true
}
fn default_channel() -> ChannelKind {
    ChannelKind::Awgn
}
fn default_power() -> f64 {
    1.0
}
fn default_step() -> f64 {
    0.01
}
fn default_fine_step() -> f64 {
    0.001
}

/// Construction parameters, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConfig {
    #[serde(rename = "N")]
    pub n: usize,
    /// Constellation order.
    #[serde(rename = "Q")]
    pub order: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub d_snr_b_db: f64,
    pub d_snr_g_db: f64,
    pub p_e_max_b: f64,
    pub l_k_max_e: f64,
    #[serde(default = "default_kappa")]
    pub kappa_d: f64,
    #[serde(default = "default_mu")]
    pub mu: usize,
    #[serde(default = "default_mu_upgrade")]
    pub mu_upgrade: usize,
    #[serde(default = "default_mc_frames")]
    pub mc_frames: usize,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_true")]
    pub shaped: bool,
    #[serde(default = "default_channel")]
    pub channel: ChannelKind,
    #[serde(default)]
    pub forced_k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_power")]
    pub power: f64,
    /// Coarse and fine spacing of the scaling search.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_fine_step")]
    pub fine_step: f64,
}

impl ConstructionConfig {
    /// Minimal configuration with defaults for everything else.
    pub fn new(
        n: usize,
        order: usize,
        d_snr_b_db: f64,
        d_snr_g_db: f64,
        p_e_max_b: f64,
        l_k_max_e: f64,
    ) -> Self {
        Self {
            n,
            order,
            scheme: default_scheme(),
            d_snr_b_db,
            d_snr_g_db,
            p_e_max_b,
            l_k_max_e,
            kappa_d: default_kappa(),
            mu: default_mu(),
            mu_upgrade: default_mu_upgrade(),
            mc_frames: default_mc_frames(),
            backend: Backend::default(),
            shaped: true,
            channel: ChannelKind::Awgn,
            forced_k: None,
            seed: 0,
            power: default_power(),
            step: default_step(),
            fine_step: default_fine_step(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        log2_len(self.n)?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.p_e_max_b > 0.0 && self.p_e_max_b < 1.0) {
            return bad("p_e_max_b must lie in (0, 1)");
        }
        if !(self.l_k_max_e > 0.0 && self.l_k_max_e <= 1.0) {
            return bad("l_k_max_e must lie in (0, 1]");
        }
        if !(self.kappa_d >= 1.0) {
            return bad("kappa_d must be at least 1");
        }
        if self.mu < 8 || self.mu % 2 != 0 || self.mu_upgrade < 8 || self.mu_upgrade % 2 != 0 {
            return bad("mu must be even and at least 8");
        }
        if !(self.power > 0.0) || !(self.step > 0.0) || !(self.fine_step > 0.0) {
            return bad("power and steps must be positive");
        }
        if self.d_snr_g_db.is_nan() || self.d_snr_b_db.is_nan() {
            return bad("design SNRs must be numbers");
        }
        Ok(())
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::new(self.order, self.scheme)
    }

    /// Bob and Eve design SNRs on the physical channel.
    pub fn design_snrs(&self) -> (f64, f64) {
        (self.d_snr_b_db, self.d_snr_b_db - self.d_snr_g_db)
    }
}

/// Equivalent AWGN SNR of a link for construction purposes.
pub fn effective_snr(kind: ChannelKind, snr_db: f64, dist: &ShapedDistribution) -> Result<f64> {
    match kind {
        ChannelKind::Awgn => Ok(snr_db),
        ChannelKind::Rayleigh if snr_db.is_infinite() => Ok(snr_db),
        ChannelKind::Rayleigh => rayleigh_equivalent_awgn_snr(snr_db, dist),
    }
}

/// Design distribution and the SNRs the statistics are computed at.
pub fn design_distribution(cfg: &ConstructionConfig) -> Result<(ShapedDistribution, DesignPoint)> {
    let c = cfg.constellation()?;
    let (b, e) = cfg.design_snrs();
    let uniform = ShapedDistribution::uniform(&c, cfg.power)?;
    let point = |d: &ShapedDistribution| -> Result<DesignPoint> {
        Ok(DesignPoint {
            snr_b_db: effective_snr(cfg.channel, b, d)?,
            snr_e_db: effective_snr(cfg.channel, e, d)?,
        })
    };
    if !cfg.shaped {
        let p = point(&uniform)?;
        return Ok((uniform, p));
    }
    let first = point(&uniform)?;
    let optimize = |p: &DesignPoint| {
        let op = SecrecyOperatingPoint {
            snr_b_db: p.snr_b_db,
            snr_e_db: p.snr_e_db,
            power: cfg.power,
        };
        optimal_distribution(&c, &op, cfg.step, cfg.fine_step)
    };
    let dist = optimize(&first)?;
    if cfg.channel == ChannelKind::Awgn {
        return Ok((dist, first));
    }
    // one fixed-point pass: the equivalent SNRs depend on the distribution
    let second = point(&dist)?;
    let dist = optimize(&second)?;
    let p = point(&dist)?;
    Ok((dist, p))
}

/// Outcome of [`size_and_build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub structure: CodeStructure,
    pub stats: BitChannelStats,
    pub design: DesignPoint,
    /// Estimated `L_k^E` at Eve's design SNR.
    pub leakage: f64,
    /// Union bound of Bob's error rates over the decoded positions.
    pub union_bound: f64,
    pub warnings: Vec<String>,
}

/// Statistics for `cfg` at its design distribution.
pub fn construction_stats(
    cfg: &ConstructionConfig,
    dist: &ShapedDistribution,
    design: DesignPoint,
) -> Result<BitChannelStats> {
    let delta = dist
        .delta()
        .ok_or_else(|| Error::InvalidArgument("distribution has no scaling".into()))?;
    match cfg.backend {
        Backend::DensityEvolution => {
            density_evolution_stats(dist, delta, design, cfg.n, cfg.mu, cfg.mu_upgrade)
        }
        Backend::MonteCarlo => {
            let (b, e) = cfg.design_snrs();
            mc_entropy_profile(
                dist,
                delta,
                cfg.channel,
                b,
                e,
                cfg.n,
                cfg.mc_frames,
                cfg.seed,
            )
        }
    }
}

/// Sizes and selects the position sets.
pub fn size_and_build(cfg: &ConstructionConfig) -> Result<Construction> {
    cfg.validate()?;
    let (dist, design) = design_distribution(cfg)?;
    let stats = construction_stats(cfg, &dist, design)?;
    build_from_stats(cfg, dist, design, stats)
}

/// Sizing and selection for precomputed statistics.
pub fn build_from_stats(
    cfg: &ConstructionConfig,
    dist: ShapedDistribution,
    design: DesignPoint,
    stats: BitChannelStats,
) -> Result<Construction> {
    let (n, q) = (cfg.n, stats.q);
    let total = n * q;
    let mut warnings = Vec::new();
    let d = if cfg.shaped {
        ((cfg.kappa_d * (q as f64 - dist.entropy()) * n as f64).round() as usize).min(total)
    } else {
        0
    };

    // the non-frozen positions are the lowest eps_bob ones
    let mut eps: Vec<f64> = stats.eps_bob.iter().flatten().copied().collect();
    eps.sort_by(f64::total_cmp);
    let mut bound = 0.0;
    let mut decoded = 0usize;
    for &e in &eps {
        if bound + e > cfg.p_e_max_b {
            break;
        }
        bound += e;
        decoded += 1;
    }
    let m = decoded.saturating_sub(d);

    let leak_for = |k: usize, r: usize| -> Result<(PositionSets, f64)> {
        let sets = select_sets(&stats, k, r, d, total - k - r - d)?;
        let leak = leakage_estimate(&sets.a, &stats.cap_eve);
        Ok((sets, leak))
    };

    let (k, r) = match cfg.forced_k {
        Some(k) => {
            if k < CRC_LEN || k + d > total {
                return Err(Error::InvalidArgument(format!(
                    "forced K = {k} does not fit"
                )));
            }
            if m < k {
                warnings.push(format!(
                    "K = {k} exceeds the reliable size {m}; reliability is not guaranteed"
                ));
            }
            (k, m.saturating_sub(k).min(total - k - d))
        }
        None => {
            if m < CRC_LEN {
                return Err(Error::Infeasible {
                    best_leakage: f64::NAN,
                    threshold: cfg.l_k_max_e,
                });
            }
            let ok = |r: usize| -> Result<(bool, f64)> {
                let (_, leak) = leak_for(m - r, r)?;
                Ok((leak <= cfg.l_k_max_e, leak))
            };
            let max_r = m - CRC_LEN;
            let step = (m / 100).max(1);
            let mut best = f64::INFINITY;
            let mut prev = 0;
            let mut found = None;
            let mut r = 0;
            loop {
                let (pass, leak) = ok(r)?;
                best = best.min(leak);
                if pass {
                    found = Some(r);
                    break;
                }
                if r == max_r {
                    break;
                }
                prev = r;
                r = (r + step).min(max_r);
            }
            let Some(mut hi) = found else {
                return Err(Error::Infeasible {
                    best_leakage: best,
                    threshold: cfg.l_k_max_e,
                });
            };
            if hi > 0 {
                // invariant: prev fails, hi passes
                let mut lo = prev;
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if ok(mid)?.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            (m - hi, hi)
        }
    };

    let (sets, leakage) = leak_for(k, r)?;
    if cfg.forced_k.is_some() && leakage > cfg.l_k_max_e {
        warnings.push(format!(
            "leakage {leakage:.4} exceeds {}; security is not guaranteed",
            cfg.l_k_max_e
        ));
    }
    let union_bound = sets
        .a
        .iter()
        .chain(&sets.r)
        .chain(&sets.d)
        .map(|&(l, i)| stats.eps_bob[l][i])
        .sum();
    let mut rng = substream(cfg.seed, 0, Stream::Construction);
    let frozen: Vec<u8> = (0..sets.f.len()).map(|_| rng.gen_range(0..2u8)).collect();
    let structure = CodeStructure::new(n, dist, sets.f, sets.a, sets.r, sets.d, frozen)?;
    Ok(Construction {
        structure,
        stats,
        design,
        leakage,
        union_bound,
        warnings,
    })
}

/// Estimated `L_k^E` of `cs` when Eve's physical SNR is `snr_e_db`.
pub fn leakage_at(
    cs: &CodeStructure,
    kind: ChannelKind,
    snr_e_db: f64,
    mu: usize,
    mu_upgrade: usize,
) -> Result<f64> {
    let dist = cs.target_dist();
    let delta = cs.delta()?;
    let snr = effective_snr(kind, snr_e_db, dist)?;
    let caps = eve_capacities(dist, delta, snr, cs.n(), mu, mu_upgrade)?;
    Ok(leakage_estimate(cs.a_set(), &caps))
}
