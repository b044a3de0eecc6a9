//! Shaped multilevel polar coding.
//!
//! Level `l` of the label is protected by its own length-`N` polar code.
//! Positions `(l, i)` are split into frozen (`F`), message (`A`), random
//! (`R`) and shaping (`D`) sets. The encoder runs a list decoder over the
//! source priors `P(b^l | b^0..b^{l-1})` level by level, forcing `F/A/R`
//! and choosing `D` bits by the argmax or randomized-rounding rule, so the
//! codeword symbols follow the target distribution. The receiver performs
//! multistage list decoding with a prior-weighted MAP demapper, carrying
//! survivors across levels and picking the final path by CRC then metric.

use num_complex::Complex64;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::channels::Observation;
use crate::constellation::{Constellation, ShapedDistribution};
use crate::error::{Error, Result};
use crate::polar::{
    crc8_attach, crc8_check, log2_len, polar_transform, ListDecoder, ListRoot, Role, CRC_LEN,
};

/// Which set a position belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Position {
    Frozen,
    Message,
    Random,
    Shaping,
}

/// How shaping positions are chosen at the encoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapingRule {
    #[default]
    Argmax,
    Randomized,
}

impl std::str::FromStr for ShapingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "argmax" => Ok(Self::Argmax),
            "randomized" | "random" => Ok(Self::Randomized),
            _ => Err(Error::InvalidArgument(format!("unknown shaping rule {s}"))),
        }
    }
}

/// Set assignment of a shaped multilevel polar code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StructureRecord", into = "StructureRecord")]
pub struct CodeStructure {
    n: usize,
    q: usize,
    f_set: Vec<(usize, usize)>,
    a_set: Vec<(usize, usize)>,
    r_set: Vec<(usize, usize)>,
    d_set: Vec<(usize, usize)>,
    frozen_values: Vec<u8>,
    target_dist: ShapedDistribution,
    kinds: Vec<Vec<Position>>,
    fixed: Vec<Vec<u8>>,
    prior_llr: Vec<Vec<f64>>,
}

/// On-disk form. Indices are 0-based `[level, index]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StructureRecord {
    #[serde(rename = "N")]
    n: usize,
    q: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "R")]
    r: usize,
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "F_set")]
    f_set: Vec<[usize; 2]>,
    #[serde(rename = "A_set")]
    a_set: Vec<[usize; 2]>,
    #[serde(rename = "R_set")]
    r_set: Vec<[usize; 2]>,
    #[serde(rename = "D_set")]
    d_set: Vec<[usize; 2]>,
    frozen_values: Vec<u8>,
    target_dist: ShapedDistribution,
}

fn pairs(v: &[(usize, usize)]) -> Vec<[usize; 2]> {
    v.iter().map(|&(l, i)| [l, i]).collect()
}

fn unpairs(v: &[[usize; 2]]) -> Vec<(usize, usize)> {
    v.iter().map(|p| (p[0], p[1])).collect()
}

impl From<CodeStructure> for StructureRecord {
    fn from(c: CodeStructure) -> Self {
        Self {
            n: c.n,
            q: c.q,
            k: c.a_set.len(),
            r: c.r_set.len(),
            d: c.d_set.len(),
            f_set: pairs(&c.f_set),
            a_set: pairs(&c.a_set),
            r_set: pairs(&c.r_set),
            d_set: pairs(&c.d_set),
            frozen_values: c.frozen_values,
            target_dist: c.target_dist,
        }
    }
}

impl TryFrom<StructureRecord> for CodeStructure {
    type Error = Error;

    fn try_from(r: StructureRecord) -> Result<Self> {
        let cs = CodeStructure::new(
            r.n,
            r.target_dist,
            unpairs(&r.f_set),
            unpairs(&r.a_set),
            unpairs(&r.r_set),
            unpairs(&r.d_set),
            r.frozen_values,
        )?;
        if cs.q != r.q || cs.k() != r.k || cs.r() != r.r || cs.d() != r.d {
            return Err(Error::InvalidArgument(
                "set sizes disagree with the set lists".into(),
            ));
        }
        Ok(cs)
    }
}

impl CodeStructure {
    /// Validates that the four sets partition `{0..q} x {0..N}`. Sets are
    /// stored sorted level-major; `frozen_values` follows the order of
    /// `f_set` as given.
    pub fn new(
        n: usize,
        target_dist: ShapedDistribution,
        f_set: Vec<(usize, usize)>,
        a_set: Vec<(usize, usize)>,
        r_set: Vec<(usize, usize)>,
        d_set: Vec<(usize, usize)>,
        frozen_values: Vec<u8>,
    ) -> Result<Self> {
        log2_len(n)?;
        let q = target_dist.constellation().bits();
        if frozen_values.len() != f_set.len() {
            return Err(Error::LengthMismatch {
                expected: f_set.len(),
                actual: frozen_values.len(),
            });
        }
        let sum = f_set.len() + a_set.len() + r_set.len() + d_set.len();
        if sum != q * n {
            return Err(Error::SizeMismatch { sum, total: q * n });
        }
        let mut kinds: Vec<Vec<Option<Position>>> = vec![vec![None; n]; q];
        let mut fixed = vec![vec![0u8; n]; q];
        for (set, kind) in [
            (&f_set, Position::Frozen),
            (&a_set, Position::Message),
            (&r_set, Position::Random),
            (&d_set, Position::Shaping),
        ] {
            for &(l, i) in set.iter() {
                if l >= q || i >= n {
                    return Err(Error::InvalidArgument(format!(
                        "position ({l}, {i}) out of range"
                    )));
                }
                if kinds[l][i].replace(kind).is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "position ({l}, {i}) assigned twice"
                    )));
                }
            }
        }
        for (&(l, i), &v) in f_set.iter().zip(&frozen_values) {
            fixed[l][i] = v & 1;
        }
        let mut f_sorted: Vec<((usize, usize), u8)> =
            f_set.into_iter().zip(frozen_values).collect();
        f_sorted.sort();
        let (f_set, frozen_values): (Vec<_>, Vec<_>) = f_sorted.into_iter().unzip();
        let sorted = |mut v: Vec<(usize, usize)>| {
            v.sort();
            v
        };
        let prior_llr = (0..q)
            .map(|l| {
                (0..1usize << l)
                    .map(|lower| {
                        let p0 = target_dist.level_zero_probability(l, lower);
                        p0.ln() - (1.0 - p0).ln()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            q,
            f_set,
            a_set: sorted(a_set),
            r_set: sorted(r_set),
            d_set: sorted(d_set),
            frozen_values,
            target_dist,
            kinds: kinds
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|k| k.expect("checked by the size sum"))
                        .collect()
                })
                .collect(),
            fixed,
            prior_llr,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn k(&self) -> usize {
        self.a_set.len()
    }

    pub fn r(&self) -> usize {
        self.r_set.len()
    }

    pub fn d(&self) -> usize {
        self.d_set.len()
    }

    pub fn f(&self) -> usize {
        self.f_set.len()
    }

    pub fn f_set(&self) -> &[(usize, usize)] {
        &self.f_set
    }

    pub fn a_set(&self) -> &[(usize, usize)] {
        &self.a_set
    }

    pub fn r_set(&self) -> &[(usize, usize)] {
        &self.r_set
    }

    pub fn d_set(&self) -> &[(usize, usize)] {
        &self.d_set
    }

    pub fn frozen_values(&self) -> &[u8] {
        &self.frozen_values
    }

    pub fn target_dist(&self) -> &ShapedDistribution {
        &self.target_dist
    }

    pub fn constellation(&self) -> &Constellation {
        self.target_dist.constellation()
    }

    /// Scaling factor of the target distribution.
    pub fn delta(&self) -> Result<f64> {
        self.target_dist.delta().ok_or_else(|| {
            Error::InvalidArgument("target distribution has no scaling factor".into())
        })
    }

    pub fn kind(&self, level: usize, index: usize) -> Position {
        self.kinds[level][index]
    }

    /// Payload length carried per frame, excluding the CRC.
    pub fn payload_len(&self) -> usize {
        self.k().saturating_sub(CRC_LEN)
    }

    /// `P(b^l = 0 | lower bits)` tables, indexed `[l][lower]`.
    pub fn level_priors(&self) -> Vec<Vec<f64>> {
        (0..self.q)
            .map(|l| {
                (0..1usize << l)
                    .map(|lower| self.target_dist.level_zero_probability(l, lower))
                    .collect()
            })
            .collect()
    }

    /// Prior LLR `ln P(b^l=0|lower)/P(b^l=1|lower)` for one symbol.
    pub fn prior_llr(&self, level: usize, lower: usize) -> f64 {
        self.prior_llr[level][lower]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One encoded frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Payload followed by its CRC, in `A` order.
    pub message: Vec<u8>,
    pub random_bits: Vec<u8>,
    pub u_levels: Vec<Vec<u8>>,
    pub labels: Vec<usize>,
    pub symbols: Vec<Complex64>,
}

impl Frame {
    /// Empirical symbol distribution of the frame.
    pub fn empirical_pmf(&self, order: usize) -> Vec<f64> {
        empirical_pmf(&self.labels, order)
    }
}

pub fn empirical_pmf(labels: &[usize], order: usize) -> Vec<f64> {
    let mut counts = vec![0.0; order];
    for &k in labels {
        counts[k] += 1.0;
    }
    let n = labels.len().max(1) as f64;
    counts.into_iter().map(|c| c / n).collect()
}

#[derive(Debug, Clone)]
struct Candidate {
    u: Vec<Vec<u8>>,
    x: Vec<Vec<u8>>,
    metric: f64,
}

impl Candidate {
    fn root() -> Self {
        Self {
            u: Vec::new(),
            x: Vec::new(),
            metric: 0.0,
        }
    }

    fn lower_label(&self, k: usize) -> usize {
        self.x
            .iter()
            .enumerate()
            .fold(0, |acc, (l, x)| acc | ((x[k] as usize) << l))
    }

    fn extend(&self, u: Vec<u8>, metric: f64) -> Result<Self> {
        let mut next = self.clone();
        next.x.push(polar_transform(&u)?);
        next.u.push(u);
        next.metric = metric;
        Ok(next)
    }

    fn labels(&self) -> Vec<usize> {
        (0..self.x[0].len()).map(|k| self.lower_label(k)).collect()
    }
}

fn advance(
    dec: &mut ListDecoder,
    cands: &[Candidate],
    roots: Vec<ListRoot>,
    roles: &[Role],
    rng: Option<&mut dyn RngCore>,
) -> Result<Vec<Candidate>> {
    dec.run(&roots, roles, rng)?
        .into_iter()
        .map(|s| cands[s.root].extend(s.u, s.metric))
        .collect()
}

/// Encodes `payload` (length `K - 8`; the CRC is appended here). `rng` fills
/// the random set and drives randomized rounding.
pub fn shaping_encode(
    cs: &CodeStructure,
    payload: &[u8],
    rule: ShapingRule,
    list_size: usize,
    rng: &mut dyn RngCore,
) -> Result<Frame> {
    if cs.k() < CRC_LEN || payload.len() != cs.payload_len() {
        return Err(Error::LengthMismatch {
            expected: cs.payload_len(),
            actual: payload.len(),
        });
    }
    let message = crc8_attach(payload);
    let random_bits: Vec<u8> = (0..cs.r()).map(|_| rng.gen_range(0..2u8)).collect();
    encode_bits(cs, &message, &random_bits, rule, list_size, rng)
}

/// Encoding with the message (CRC included) and random bits supplied.
pub fn encode_bits(
    cs: &CodeStructure,
    message: &[u8],
    random_bits: &[u8],
    rule: ShapingRule,
    list_size: usize,
    rng: &mut dyn RngCore,
) -> Result<Frame> {
    if message.len() != cs.k() || random_bits.len() != cs.r() {
        return Err(Error::LengthMismatch {
            expected: cs.k() + cs.r(),
            actual: message.len() + random_bits.len(),
        });
    }
    let (n, q) = (cs.n, cs.q);
    let mut fixed = cs.fixed.clone();
    for (&(l, i), &b) in cs.a_set.iter().zip(message) {
        fixed[l][i] = b & 1;
    }
    for (&(l, i), &b) in cs.r_set.iter().zip(random_bits) {
        fixed[l][i] = b & 1;
    }
    let list = list_size.max(1);
    let mut dec = ListDecoder::new(n, list)?;
    let mut cands = vec![Candidate::root()];
    for l in 0..q {
        let roles: Vec<Role> = (0..n)
            .map(|i| match cs.kinds[l][i] {
                Position::Shaping => match rule {
                    ShapingRule::Argmax => Role::Free,
                    ShapingRule::Randomized => Role::Sample,
                },
                _ => Role::Fixed(fixed[l][i]),
            })
            .collect();
        let roots = cands
            .iter()
            .map(|c| ListRoot {
                llrs: (0..n).map(|k| cs.prior_llr(l, c.lower_label(k))).collect(),
                metric: c.metric,
            })
            .collect();
        let r: Option<&mut dyn RngCore> = match rule {
            ShapingRule::Randomized => Some(&mut *rng),
            ShapingRule::Argmax => None,
        };
        cands = advance(&mut dec, &cands, roots, &roles, r)?;
    }
    let target = cs.target_dist.pmf();
    let order = cs.constellation().order();
    let mut best: Option<(f64, &Candidate)> = None;
    for c in &cands {
        // candidates arrive sorted by metric, so ties keep the lower metric
        let tv = crate::constellation::tv_distance(&empirical_pmf(&c.labels(), order), target);
        if best.map_or(true, |(b, _)| tv < b) {
            best = Some((tv, c));
        }
    }
    let chosen = best.expect("at least one survivor").1;
    let labels = chosen.labels();
    let c = cs.constellation();
    Ok(Frame {
        message: message.to_vec(),
        random_bits: random_bits.to_vec(),
        u_levels: chosen.u.clone(),
        symbols: labels.iter().map(|&k| c.point(k)).collect(),
        labels,
    })
}

/// Per-symbol log-metrics `ln w(x) - |y - h delta x|^2 / sigma^2` for every
/// label, flattened `[k * Q + label]`. `log_weights` of `None` means equal
/// weights.
pub fn symbol_metrics(
    c: &Constellation,
    delta: f64,
    obs: &Observation,
    log_weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if !(obs.noise_var >= 0.0) {
        return Err(Error::InvalidArgument(
            "noise variance must be non-negative".into(),
        ));
    }
    // noiseless: every point but the received one gets -inf
    let nv = obs.noise_var.max(f64::MIN_POSITIVE);
    let q = c.order();
    let mut out = Vec::with_capacity(obs.y.len() * q);
    for (k, y) in obs.y.iter().enumerate() {
        let h = obs
            .gains
            .as_ref()
            .map_or(Complex64::new(1.0, 0.0), |g| g[k]);
        for (label, x) in c.points().iter().enumerate() {
            let w = log_weights.map_or(0.0, |lw| lw[label]);
            out.push(w - (y - h * x * delta).norm_sqr() / nv);
        }
    }
    Ok(out)
}

fn log_sum_exp(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Bit LLR of level `level` for one symbol given its lower label bits.
pub(crate) fn level_llr(metrics: &[f64], bits: usize, level: usize, lower: usize) -> f64 {
    let upper = bits - level - 1;
    let side = |b: usize| {
        log_sum_exp((0..1usize << upper).map(move |hi| {
            let label = lower | (b << level) | (hi << (level + 1));
            metrics[label]
        }))
    };
    let (a, b) = (side(0), side(1));
    if a == b {
        0.0
    } else {
        a - b
    }
}

/// Bit-level MAP demapper: LLRs of level `level` given the lower label bits
/// `lower[k]` of each symbol. Without `pmf` all points weigh equally; with it
/// the LLR includes the source prior.
pub fn bitlevel_demap(
    c: &Constellation,
    delta: f64,
    level: usize,
    lower: &[usize],
    obs: &Observation,
    pmf: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if lower.len() != obs.y.len() {
        return Err(Error::LengthMismatch {
            expected: obs.y.len(),
            actual: lower.len(),
        });
    }
    let lw: Option<Vec<f64>> = pmf.map(|p| p.iter().map(|v| v.ln()).collect());
    let m = symbol_metrics(c, delta, obs, lw.as_deref())?;
    let q = c.order();
    Ok(lower
        .iter()
        .enumerate()
        .map(|(k, &lo)| level_llr(&m[k * q..(k + 1) * q], c.bits(), level, lo))
        .collect())
}

/// Result of multistage decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdResult {
    /// Estimated payload, CRC removed.
    pub payload: Vec<u8>,
    /// Estimated `A` bits including the CRC.
    pub message: Vec<u8>,
    pub random_bits: Vec<u8>,
    pub u_levels: Vec<Vec<u8>>,
    /// Whether the chosen path passes the CRC.
    pub success: bool,
}

/// Multistage list decoding of one frame.
pub fn msd_decode(cs: &CodeStructure, obs: &Observation, list_size: usize) -> Result<MsdResult> {
    let (n, q) = (cs.n, cs.q);
    if obs.y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: obs.y.len(),
        });
    }
    let c = cs.constellation();
    let order = c.order();
    let delta = cs.delta()?;
    let lw: Vec<f64> = cs.target_dist.pmf().iter().map(|p| p.ln()).collect();
    let metrics = symbol_metrics(c, delta, obs, Some(&lw))?;
    let list = list_size.max(1);
    let mut dec = ListDecoder::new(n, list)?;
    let mut cands = vec![Candidate::root()];
    for l in 0..q {
        let roles: Vec<Role> = (0..n)
            .map(|i| match cs.kinds[l][i] {
                Position::Frozen => Role::Fixed(cs.fixed[l][i]),
                _ => Role::Free,
            })
            .collect();
        let roots = cands
            .iter()
            .map(|cand| ListRoot {
                llrs: (0..n)
                    .map(|k| {
                        level_llr(
                            &metrics[k * order..(k + 1) * order],
                            q,
                            l,
                            cand.lower_label(k),
                        )
                    })
                    .collect(),
                metric: cand.metric,
            })
            .collect();
        cands = advance(&mut dec, &cands, roots, &roles, None)?;
    }
    let extract = |cand: &Candidate, set: &[(usize, usize)]| -> Vec<u8> {
        set.iter().map(|&(l, i)| cand.u[l][i]).collect()
    };
    let pick = cands
        .iter()
        .position(|cand| crc8_check(&extract(cand, &cs.a_set)));
    let chosen = &cands[pick.unwrap_or(0)];
    let message = extract(chosen, &cs.a_set);
    Ok(MsdResult {
        payload: message[..cs.payload_len()].to_vec(),
        random_bits: extract(chosen, &cs.r_set),
        message,
        u_levels: chosen.u.clone(),
        success: pick.is_some(),
    })
}
