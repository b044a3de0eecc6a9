//! ASK/QAM constellations with set-partitioning labels and the
//! Maxwell-Boltzmann family of input distributions.
//!
//! Labels are integers `k = sum_l b^l 2^l`, with level `l = 0` decided first
//! by the multistage decoder. For ASK the label `k` maps to the amplitude
//! `Q - 1 - 2k`, so bit 0 of a BPSK label maps to `+1`. Splitting on the lowest
//! label bit keeps every other point, which doubles the intra-subset distance
//! at every level. QAM is the product of two such ASK labelings, interleaving
//! the in-phase and quadrature label bits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modulation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    Ask,
    Qam,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Ask => write!(f, "ASK"),
            Scheme::Qam => write!(f, "QAM"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ASK" => Ok(Scheme::Ask),
            "QAM" => Ok(Scheme::Qam),
            _ => Err(Error::InvalidArgument(format!("unknown scheme {s}"))),
        }
    }
}

/// A labelled constellation. Points are stored in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits: usize,
    scheme: Scheme,
    points: Vec<Complex64>,
}

fn ask_amplitude(order: usize, index: usize) -> f64 {
    (order as f64 - 1.0) - 2.0 * index as f64
}

impl Constellation {
    /// Builds a `Q`-point constellation with set-partitioning labels.
    pub fn new(order: usize, scheme: Scheme) -> Result<Self> {
        if !order.is_power_of_two() || !(2..=1024).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        let bits = order.trailing_zeros() as usize;
        let points = match scheme {
            Scheme::Ask => (0..order)
                .map(|k| Complex64::new(ask_amplitude(order, k), 0.0))
                .collect(),
            Scheme::Qam => {
                if bits % 2 != 0 {
                    return Err(Error::NonSquareQam(order));
                }
                let side = 1usize << (bits / 2);
                (0..order)
                    .map(|k| {
                        let (mut i_idx, mut q_idx) = (0, 0);
                        for l in 0..bits {
                            let b = (k >> l) & 1;
                            if l % 2 == 0 {
                                i_idx |= b << (l / 2);
                            } else {
                                q_idx |= b << (l / 2);
                            }
                        }
                        Complex64::new(ask_amplitude(side, i_idx), ask_amplitude(side, q_idx))
                    })
                    .collect()
            }
        };
        Ok(Self {
            order,
            bits,
            scheme,
            points,
        })
    }

    /// Number of points `Q`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Bits per symbol `q = log2(Q)`.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Real dimensions occupied by one symbol.
    pub fn dimensions(&self) -> usize {
        match self.scheme {
            Scheme::Ask => 1,
            Scheme::Qam => 2,
        }
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// The symbol mapper `f`: label bits (level 0 first) to a point.
    pub fn map(&self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits);
        self.points[label_from_bits(bits)]
    }

    /// Inverse of [`map`](Self::map). Returns `None` for a point not in the set.
    pub fn inverse_map(&self, point: Complex64) -> Option<Vec<u8>> {
        self.points
            .iter()
            .position(|p| (p - point).norm_sqr() < 1e-18)
            .map(|k| bits_from_label(k, self.bits))
    }

    /// Smallest energy `|x|^2` over the points; the limit of the MB energy as
    /// `nu` grows without bound.
    pub fn min_energy(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.norm_sqr())
            .fold(f64::INFINITY, f64::min)
    }

    /// Average energy under the uniform distribution.
    pub fn uniform_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }

    /// Minimum distance inside the subsets obtained by fixing the lowest
    /// `fixed_levels` label bits.
    pub fn subset_min_distance(&self, fixed_levels: usize) -> f64 {
        subset_min_distance(&self.points, fixed_levels)
    }
}

pub(crate) fn label_from_bits(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (l, &b)| acc | ((b as usize & 1) << l))
}

pub(crate) fn bits_from_label(label: usize, q: usize) -> Vec<u8> {
    (0..q).map(|l| ((label >> l) & 1) as u8).collect()
}

/// Minimum intra-subset distance for an arbitrary labelled point list.
pub fn subset_min_distance(points: &[Complex64], fixed_levels: usize) -> f64 {
    let mask = (1usize << fixed_levels) - 1;
    let mut best = f64::INFINITY;
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            if a & mask == b & mask {
                best = best.min((points[a] - points[b]).norm());
            }
        }
    }
    best
}

/// A Maxwell-Boltzmann distribution `P(x) ∝ exp(-nu |x|^2)` on a
/// constellation, optionally paired with the scaling factor `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedDistribution {
    constellation: Constellation,
    nu: f64,
    delta: Option<f64>,
    pmf: Vec<f64>,
}

/// Maxwell-Boltzmann pmf at shaping parameter `nu`.
pub fn mb_pmf(c: &Constellation, nu: f64) -> Result<ShapedDistribution> {
    if !nu.is_finite() || nu < 0.0 {
        return Err(Error::InvalidNu(nu));
    }
    Ok(ShapedDistribution {
        constellation: c.clone(),
        nu,
        delta: None,
        pmf: mb_weights(c, nu),
    })
}

fn mb_weights(c: &Constellation, nu: f64) -> Vec<f64> {
    // shift the exponent by the smallest energy so nothing underflows to 0/0
    let e0 = c.min_energy();
    let w: Vec<f64> = c
        .points()
        .iter()
        .map(|p| (-nu * (p.norm_sqr() - e0)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn mb_energy(c: &Constellation, nu: f64) -> f64 {
    mb_weights(c, nu)
        .iter()
        .zip(c.points())
        .map(|(p, x)| p * x.norm_sqr())
        .sum()
}

const NU_REL_TOL: f64 = 1e-10;
const BISECTION_CAP: usize = 200;

/// Finds `nu` with `E[|X_nu|^2] = target_energy` by bracket doubling and
/// bisection; the energy is strictly decreasing in `nu`.
pub fn solve_nu(c: &Constellation, target_energy: f64) -> Result<f64> {
    let uniform = c.uniform_energy();
    let floor = c.min_energy();
    if !target_energy.is_finite() {
        return Err(Error::UnreachableEnergy {
            target: target_energy,
            uniform,
        });
    }
    if (target_energy - uniform).abs() <= NU_REL_TOL * target_energy {
        return Ok(0.0);
    }
    if target_energy <= floor || target_energy > uniform {
        return Err(Error::UnreachableEnergy {
            target: target_energy,
            uniform,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while mb_energy(c, hi) >= target_energy {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > BISECTION_CAP {
            return Err(Error::NoConvergence { lo, hi });
        }
    }
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        let e = mb_energy(c, mid);
        if (e - target_energy).abs() <= NU_REL_TOL * target_energy * 1e-2 {
            return Ok(mid);
        }
        if e > target_energy {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let nu = 0.5 * (lo + hi);
    if (mb_energy(c, nu) - target_energy).abs() <= NU_REL_TOL * target_energy {
        Ok(nu)
    } else {
        Err(Error::NoConvergence { lo, hi })
    }
}

/// Feasible scaling interval `[sqrt(P / E_uniform), sqrt(P / E_min))`.
///
/// For ASK the upper end is `sqrt(P)`. The interval is degenerate for
/// BPSK, where every distribution has unit energy.
pub fn feasible_delta_interval(c: &Constellation, power: f64) -> (f64, f64) {
    (
        (power / c.uniform_energy()).sqrt(),
        (power / c.min_energy()).sqrt(),
    )
}

/// MB distribution scaled by `delta` that meets `E[|delta X|^2] = power`.
pub fn fit_delta_distribution(
    c: &Constellation,
    delta: f64,
    power: f64,
) -> Result<ShapedDistribution> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta = {delta}")));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidArgument(format!("power = {power}")));
    }
    let nu = solve_nu(c, power / (delta * delta))?;
    let mut d = mb_pmf(c, nu)?;
    d.delta = Some(delta);
    Ok(d)
}

impl ShapedDistribution {
    /// Uniform distribution scaled to average power `power`.
    pub fn uniform(c: &Constellation, power: f64) -> Result<Self> {
        fit_delta_distribution(c, feasible_delta_interval(c, power).0, power)
    }

    /// Builds a distribution from an explicit pmf (used when loading files).
    pub fn from_parts(
        constellation: Constellation,
        nu: f64,
        delta: Option<f64>,
        pmf: Vec<f64>,
    ) -> Result<Self> {
        if pmf.len() != constellation.order() {
            return Err(Error::LengthMismatch {
                expected: constellation.order(),
                actual: pmf.len(),
            });
        }
        let s: f64 = pmf.iter().sum();
        if pmf.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "pmf must be a probability vector".into(),
            ));
        }
        Ok(Self {
            constellation,
            nu,
            delta,
            pmf,
        })
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    /// Probabilities indexed by label.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `E[|X|^2]` of the unscaled constellation.
    pub fn energy(&self) -> f64 {
        self.pmf
            .iter()
            .zip(self.constellation.points())
            .map(|(p, x)| p * x.norm_sqr())
            .sum()
    }

    /// `E[|delta X|^2]`, if `delta` is set.
    pub fn power(&self) -> Option<f64> {
        self.delta.map(|d| d * d * self.energy())
    }

    /// Entropy `H(X)` in bits.
    pub fn entropy(&self) -> f64 {
        -self
            .pmf
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.log2())
            .sum::<f64>()
    }

    /// `P(b^l = 0 | b^0 .. b^{l-1})` where `lower` holds the lower label bits
    /// packed as an integer.
    pub fn level_zero_probability(&self, level: usize, lower: usize) -> f64 {
        let mask = (1usize << level) - 1;
        let (mut p0, mut p1) = (0.0, 0.0);
        for (k, p) in self.pmf.iter().enumerate() {
            if k & mask != lower & mask {
                continue;
            }
            if (k >> level) & 1 == 0 {
                p0 += p;
            } else {
                p1 += p;
            }
        }
        if p0 + p1 > 0.0 {
            p0 / (p0 + p1)
        } else {
            0.5
        }
    }

    /// Total-variation distance between this pmf and `other` (same order).
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        tv_distance(&self.pmf, other)
    }

    /// Serializable view.
    pub fn to_record(&self) -> DistributionRecord {
        DistributionRecord {
            order: self.constellation.order(),
            scheme: self.constellation.scheme(),
            nu: self.nu,
            delta: self.delta,
            pmf: self.pmf.clone(),
        }
    }

    pub fn from_record(r: &DistributionRecord) -> Result<Self> {
        let c = Constellation::new(r.order, r.scheme)?;
        Self::from_parts(c, r.nu, r.delta, r.pmf.clone())
    }
}

/// Half the l1 distance between two pmfs.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// JSON form `{"Q", "scheme", "nu", "delta", "pmf"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRecord {
    #[serde(rename = "Q")]
    pub order: usize,
    pub scheme: Scheme,
    pub nu: f64,
    pub delta: Option<f64>,
    pub pmf: Vec<f64>,
}

impl Serialize for ShapedDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ShapedDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = DistributionRecord::deserialize(d)?;
        ShapedDistribution::from_record(&r).map_err(serde::de::Error::custom)
    }
}
