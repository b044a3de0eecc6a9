use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::binary_entropy;
use crate::error::{Error, Result};

/// Direction of a quantized approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approx {
    /// The result is degraded with respect to the true channel.
    Degrading,
    /// The result is upgraded with respect to the true channel.
    Upgrading,
}

/// A binary memoryless symmetric channel written as a mixture of binary
/// symmetric channels: components `(weight, crossover)` with crossover in
/// `[0, 1/2]`, sorted by crossover.
#[derive(Debug, Clone, PartialEq)]
pub struct BscMixture {
    comps: Vec<(f64, f64)>,
}

fn fold(p: f64) -> f64 {
    if p > 0.5 {
        1.0 - p
    } else {
        p.max(0.0)
    }
}

/// Crossover of the component carrying LLR magnitude `|llr|`.
pub fn crossover_from_llr(llr: f64) -> f64 {
    let a = llr.abs();
    if a.is_infinite() {
        0.0
    } else {
        1.0 / (1.0 + a.exp())
    }
}

impl BscMixture {
    /// Normalizes the weights, folds crossovers and merges exact duplicates.
    pub fn new(comps: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = comps.iter().map(|c| c.0).sum();
        if !(total > 0.0) || comps.iter().any(|c| !(c.0 >= 0.0) || c.1.is_nan()) {
            return Err(Error::InvalidArgument(
                "mixture weights must be non-negative with positive sum".into(),
            ));
        }
        let mut v: Vec<(f64, f64)> = comps
            .into_iter()
            .filter(|c| c.0 > 0.0)
            .map(|(w, p)| (w / total, fold(p)))
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (w, p) in v {
            match out.last_mut() {
                Some(last) if last.1 == p => last.0 += w,
                _ => out.push((w, p)),
            }
        }
        Ok(Self { comps: out })
    }

    pub fn bsc(p: f64) -> Self {
        Self {
            comps: vec![(1.0, fold(p))],
        }
    }

    pub fn bec(eps: f64) -> Self {
        Self::new(vec![(1.0 - eps, 0.0), (eps, 0.5)]).expect("valid erasure probability")
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.comps
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    /// MAP bit error probability.
    pub fn error_probability(&self) -> f64 {
        self.comps.iter().map(|(w, p)| w * p).sum()
    }

    /// Conditional entropy of the input given the output, in bits.
    pub fn entropy(&self) -> f64 {
        self.comps
            .iter()
            .map(|(w, p)| w * binary_entropy(*p))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    pub fn capacity(&self) -> f64 {
        1.0 - self.entropy()
    }

    pub fn bhattacharyya(&self) -> f64 {
        self.comps
            .iter()
            .map(|(w, p)| w * 2.0 * (p * (1.0 - p)).sqrt())
            .sum()
    }

    /// Check-node combination `W ⊛ W'`.
    pub fn minus(&self, other: &Self) -> Self {
        Self::new(self.minus_raw(other)).expect("product of valid mixtures")
    }

    /// Variable-node combination `W ⊛ W'` given the upper bit.
    pub fn plus(&self, other: &Self) -> Self {
        Self::new(self.plus_raw(other)).expect("product of valid mixtures")
    }

    /// Pairs of components with their joint weight; a channel combined with
    /// itself only visits each unordered pair once.
    fn pairs<'a>(&'a self, other: &'a Self) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
        let same = std::ptr::eq(self, other);
        self.comps
            .iter()
            .enumerate()
            .flat_map(move |(i, &(w1, p1))| {
                let start = if same { i } else { 0 };
                other.comps[start..]
                    .iter()
                    .enumerate()
                    .map(move |(k, &(w2, p2))| {
                        let mult = if same && k > 0 { 2.0 } else { 1.0 };
                        (mult * w1 * w2, p1, p2)
                    })
            })
    }

    fn minus_raw(&self, other: &Self) -> Vec<(f64, f64)> {
        self.pairs(other)
            .map(|(w, p1, p2)| (w, p1 * (1.0 - p2) + p2 * (1.0 - p1)))
            .collect()
    }

    fn plus_raw(&self, other: &Self) -> Vec<(f64, f64)> {
        let mut v = Vec::with_capacity(2 * self.len() * other.len());
        for (w, p1, p2) in self.pairs(other) {
            let agree = (1.0 - p1) * (1.0 - p2) + p1 * p2;
            if agree > 0.0 {
                v.push((w * agree, p1 * p2 / agree));
            }
            let a = p1 * (1.0 - p2);
            let b = p2 * (1.0 - p1);
            if a + b > 0.0 {
                v.push((w * (a + b), a.min(b) / (a + b)));
            }
        }
        v
    }

    /// Reduces to at most `mu` components (two for upgrading at minimum),
    /// keeping the stated approximation direction.
    pub fn reduce(&self, mu: usize, mode: Approx) -> Self {
        if self.len() <= mu.max(2) {
            return self.clone();
        }
        reduce_raw(self.comps.clone(), mu, mode)
    }
}

/// Reduction of unsorted, unnormalized components; the coarse pass runs
/// before sorting so large products stay cheap.
fn reduce_raw(comps: Vec<(f64, f64)>, mu: usize, mode: Approx) -> BscMixture {
    let mu = mu.max(2);
    let comps: Vec<(f64, f64)> = comps.into_iter().map(|(w, p)| (w, fold(p))).collect();
    let pre = prebin(&comps, 16 * mu, mode);
    let sorted = BscMixture::new(pre).expect("mass preserved");
    if sorted.len() <= mu {
        return sorted;
    }
    let out = match mode {
        Approx::Degrading => greedy_degrade(sorted.comps, mu),
        Approx::Upgrading => greedy_upgrade(sorted.comps, mu),
    };
    BscMixture::new(out).expect("mass preserved")
}

fn h(p: f64) -> f64 {
    binary_entropy(p)
}

thread_local! {
    static EDGES: std::cell::RefCell<std::collections::HashMap<usize, std::rc::Rc<Vec<f64>>>> =
        Default::default();
}

/// Cached [`compute_edges`].
fn entropy_edges(bins: usize) -> std::rc::Rc<Vec<f64>> {
    EDGES.with(|c| {
        c.borrow_mut()
            .entry(bins)
            .or_insert_with(|| std::rc::Rc::new(compute_edges(bins)))
            .clone()
    })
}

/// Crossover edges `p_j` with `h(p_j) = j / bins`.
fn compute_edges(bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|j| {
            let target = j as f64 / bins as f64;
            let (mut lo, mut hi) = (0.0f64, 0.5f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if h(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if j == 0 {
                0.0
            } else if j == bins {
                0.5
            } else {
                0.5 * (lo + hi)
            }
        })
        .collect()
}

/// Coarse pass on a uniform entropy grid: degrading merges each bin to its
/// mean crossover, upgrading splits each component onto the bin edges.
fn prebin(comps: &[(f64, f64)], bins: usize, mode: Approx) -> Vec<(f64, f64)> {
    if comps.len() <= bins {
        return comps.to_vec();
    }
    let edges = entropy_edges(bins);
    let bin_of = |p: f64| -> usize {
        let j = (h(p) * bins as f64).floor() as usize;
        let mut j = j.min(bins - 1);
        while j > 0 && p < edges[j] {
            j -= 1;
        }
        while j + 1 < bins && p > edges[j + 1] {
            j += 1;
        }
        j
    };
    match mode {
        Approx::Degrading => {
            let mut acc = vec![(0.0, 0.0); bins];
            for &(w, p) in comps {
                let j = bin_of(p);
                acc[j].0 += w;
                acc[j].1 += w * p;
            }
            acc.into_iter()
                .filter(|a| a.0 > 0.0)
                .map(|(w, wp)| (w, wp / w))
                .collect()
        }
        Approx::Upgrading => {
            let mut mass = vec![0.0; bins + 1];
            for &(w, p) in comps {
                let j = bin_of(p);
                let (a, b) = (edges[j], edges[j + 1]);
                if b > a {
                    let t = ((b - p) / (b - a)).clamp(0.0, 1.0);
                    mass[j] += w * t;
                    mass[j + 1] += w * (1.0 - t);
                } else {
                    mass[j] += w;
                }
            }
            mass.into_iter()
                .zip(edges.iter().copied())
                .filter(|(w, _)| *w > 0.0)
                .collect()
        }
    }
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    idx: usize,
    stamp: u32,
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then index
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Doubly linked list over sorted components.
struct Chain {
    w: Vec<f64>,
    p: Vec<f64>,
    prev: Vec<Option<usize>>,
    next: Vec<Option<usize>>,
    alive: Vec<bool>,
    stamp: Vec<u32>,
    count: usize,
}

impl Chain {
    fn new(comps: Vec<(f64, f64)>) -> Self {
        let n = comps.len();
        Self {
            w: comps.iter().map(|c| c.0).collect(),
            p: comps.iter().map(|c| c.1).collect(),
            prev: (0..n).map(|k| k.checked_sub(1)).collect(),
            next: (0..n).map(|k| (k + 1 < n).then_some(k + 1)).collect(),
            alive: vec![true; n],
            stamp: vec![0; n],
            count: n,
        }
    }

    fn unlink(&mut self, k: usize) {
        let (a, b) = (self.prev[k], self.next[k]);
        if let Some(a) = a {
            self.next[a] = b;
        }
        if let Some(b) = b {
            self.prev[b] = a;
        }
        self.alive[k] = false;
        self.count -= 1;
    }

    fn collect(&self) -> Vec<(f64, f64)> {
        (0..self.w.len())
            .filter(|&k| self.alive[k])
            .map(|k| (self.w[k], self.p[k]))
            .collect()
    }
}

/// Merges adjacent pairs (keyed by the left member) with least capacity loss.
fn greedy_degrade(comps: Vec<(f64, f64)>, mu: usize) -> Vec<(f64, f64)> {
    let mut c = Chain::new(comps);
    let cost = |c: &Chain, k: usize| -> Option<f64> {
        let j = c.next[k]?;
        let (w1, p1, w2, p2) = (c.w[k], c.p[k], c.w[j], c.p[j]);
        let w = w1 + w2;
        let pm = (w1 * p1 + w2 * p2) / w;
        Some(w * h(pm) - w1 * h(p1) - w2 * h(p2))
    };
    let mut heap = BinaryHeap::new();
    for k in 0..c.w.len() {
        if let Some(v) = cost(&c, k) {
            heap.push(Entry {
                cost: v,
                idx: k,
                stamp: 0,
            });
        }
    }
    while c.count > mu {
        let Some(e) = heap.pop() else { break };
        if !c.alive[e.idx] || e.stamp != c.stamp[e.idx] {
            continue;
        }
        let k = e.idx;
        let Some(j) = c.next[k] else { continue };
        let w = c.w[k] + c.w[j];
        c.p[k] = (c.w[k] * c.p[k] + c.w[j] * c.p[j]) / w;
        c.w[k] = w;
        c.unlink(j);
        for t in [Some(k), c.prev[k]].into_iter().flatten() {
            c.stamp[t] += 1;
            if let Some(v) = cost(&c, t) {
                heap.push(Entry {
                    cost: v,
                    idx: t,
                    stamp: c.stamp[t],
                });
            }
        }
    }
    c.collect()
}

/// Removes interior components by splitting their mass onto both neighbours
/// (preserving the mean crossover) with least capacity gain.
fn greedy_upgrade(comps: Vec<(f64, f64)>, mu: usize) -> Vec<(f64, f64)> {
    let mut c = Chain::new(comps);
    let cost = |c: &Chain, k: usize| -> Option<f64> {
        let (a, b) = (c.prev[k]?, c.next[k]?);
        let (pa, pk, pb) = (c.p[a], c.p[k], c.p[b]);
        let t = (pb - pk) / (pb - pa);
        Some(c.w[k] * (h(pk) - t * h(pa) - (1.0 - t) * h(pb)))
    };
    let mut heap = BinaryHeap::new();
    for k in 0..c.w.len() {
        if let Some(v) = cost(&c, k) {
            heap.push(Entry {
                cost: v,
                idx: k,
                stamp: 0,
            });
        }
    }
    while c.count > mu {
        let Some(e) = heap.pop() else { break };
        if !c.alive[e.idx] || e.stamp != c.stamp[e.idx] {
            continue;
        }
        let k = e.idx;
        let (Some(a), Some(b)) = (c.prev[k], c.next[k]) else {
            continue;
        };
        let t = (c.p[b] - c.p[k]) / (c.p[b] - c.p[a]);
        c.w[a] += t * c.w[k];
        c.w[b] += (1.0 - t) * c.w[k];
        c.unlink(k);
        for s in [a, b] {
            c.stamp[s] += 1;
            if let Some(v) = cost(&c, s) {
                heap.push(Entry {
                    cost: v,
                    idx: s,
                    stamp: c.stamp[s],
                });
            }
        }
    }
    c.collect()
}

/// Quantized bit-channel approximations of the `N` polarized channels of
/// `base`, index order matching the polar transform of this crate.
pub fn polarize(base: &BscMixture, len: usize, mu: usize, mode: Approx) -> Result<Vec<BscMixture>> {
    let steps = crate::polar::log2_len(len)?;
    let mut level = vec![base.reduce(mu, mode)];
    for _ in 0..steps {
        let mut next = Vec::with_capacity(2 * level.len());
        for ch in &level {
            next.push(reduce_raw(ch.minus_raw(ch), mu, mode));
            next.push(reduce_raw(ch.plus_raw(ch), mu, mode));
        }
        level = next;
    }
    Ok(level)
}
