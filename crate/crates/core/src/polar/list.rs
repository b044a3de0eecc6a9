use rand::RngCore;

use super::{bit_reverse, clamp, decision_penalty, f_node, g_node, hard_decision, log2_len};
use crate::error::{Error, Result};

/// How the decoder treats one position of `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Forced to the given bit.
    Fixed(u8),
    /// Both values explored; with a list of one this is the argmax.
    Free,
    /// Drawn from the successive posterior with the caller's generator.
    Sample,
}

/// One starting point of a list run: LLRs in codeword order and an initial
/// path metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ListRoot {
    pub llrs: Vec<f64>,
    pub metric: f64,
}

/// A surviving path: its decisions, metric and the root it grew from.
#[derive(Debug, Clone, PartialEq)]
pub struct Survivor {
    pub u: Vec<u8>,
    pub metric: f64,
    pub root: usize,
}

#[derive(Debug, Clone)]
struct Pool<T> {
    stride: usize,
    data: Vec<T>,
    refs: Vec<u32>,
    free: Vec<usize>,
}

impl<T: Copy + Default> Pool<T> {
    fn new(stride: usize, slots: usize) -> Self {
        Self {
            stride,
            data: vec![T::default(); stride * slots],
            refs: vec![0; slots],
            free: (0..slots).rev().collect(),
        }
    }

    fn reset(&mut self) {
        self.refs.iter_mut().for_each(|r| *r = 0);
        self.free = (0..self.refs.len()).rev().collect();
    }

    fn take(&mut self) -> usize {
        let s = self.free.pop().expect("pool exhausted");
        self.refs[s] = 1;
        s
    }

    fn release(&mut self, s: usize) {
        self.refs[s] -= 1;
        if self.refs[s] == 0 {
            self.free.push(s);
        }
    }

    fn slice(&self, s: usize) -> &[T] {
        &self.data[s * self.stride..(s + 1) * self.stride]
    }

    fn slice_mut(&mut self, s: usize) -> &mut [T] {
        &mut self.data[s * self.stride..(s + 1) * self.stride]
    }

    /// Exclusive slot for a write that overwrites everything.
    fn own_fresh(&mut self, s: usize) -> usize {
        if self.refs[s] > 1 {
            self.refs[s] -= 1;
            self.take()
        } else {
            s
        }
    }

    /// Exclusive slot for a partial write, copying shared contents.
    fn own_copy(&mut self, s: usize) -> usize {
        if self.refs[s] > 1 {
            self.refs[s] -= 1;
            let t = self.take();
            let (a, b) = (s * self.stride, t * self.stride);
            self.data.copy_within(a..a + self.stride, b);
            t
        } else {
            s
        }
    }
}

/// List successive cancellation decoder with lazy copying of the
/// intermediate LLR and partial-sum arrays.
///
/// A run may start from several roots, each with its own channel LLRs and
/// metric, which is how survivors of one multilevel stage seed the next.
#[derive(Debug, Clone)]
pub struct ListDecoder {
    len: usize,
    bits: usize,
    list: usize,
    llr: Vec<Pool<f64>>,
    part: Vec<Pool<u8>>,
    path_llr: Vec<Vec<usize>>,
    path_part: Vec<Vec<usize>>,
    active: Vec<bool>,
    metric: Vec<f64>,
    parent: Vec<u16>,
    bit: Vec<u8>,
}

impl ListDecoder {
    pub fn new(len: usize, list: usize) -> Result<Self> {
        let bits = log2_len(len)?;
        if list == 0 || list > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("list size {list}")));
        }
        Ok(Self {
            len,
            bits,
            list,
            llr: (0..=bits).map(|l| Pool::new(len >> l, list)).collect(),
            part: (0..=bits)
                .map(|l| Pool::new(2 * (len >> l), list))
                .collect(),
            path_llr: vec![vec![0; list]; bits + 1],
            path_part: vec![vec![0; list]; bits + 1],
            active: vec![false; list],
            metric: vec![0.0; list],
            parent: vec![0; len * list],
            bit: vec![0; len * list],
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn list_size(&self) -> usize {
        self.list
    }

    /// Decodes from `roots` under `roles`; survivors come back sorted by
    /// metric, ties to the lower path index. `rng` is required when any role
    /// is [`Role::Sample`].
    pub fn run(
        &mut self,
        roots: &[ListRoot],
        roles: &[Role],
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<Vec<Survivor>> {
        if roots.is_empty() || roots.len() > self.list {
            return Err(Error::InvalidArgument(format!(
                "{} roots for a list of {}",
                roots.len(),
                self.list
            )));
        }
        if roles.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: roles.len(),
            });
        }
        if rng.is_none() && roles.contains(&Role::Sample) {
            return Err(Error::InvalidArgument(
                "sampled positions need a generator".into(),
            ));
        }
        self.start(roots)?;
        for phase in 0..self.len {
            for l in 0..self.list {
                if self.active[l] {
                    self.calc_llr(self.bits, phase, l);
                }
            }
            match roles[phase] {
                Role::Fixed(b) => self.force(phase, |_, _| b & 1),
                Role::Sample => {
                    let r = rng.as_deref_mut().expect("checked above");
                    self.force(phase, |_, llr| {
                        // P(0) = 1 / (1 + e^{-llr}); 53-bit uniform draw
                        let p0 = 1.0 / (1.0 + (-llr).exp());
                        let v = (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                        u8::from(v >= p0)
                    })
                }
                Role::Free => self.fork(phase),
            }
            if phase % 2 == 1 {
                for l in 0..self.list {
                    if self.active[l] {
                        self.update_part(phase, l);
                    }
                }
            }
        }
        Ok(self.collect())
    }

    fn start(&mut self, roots: &[ListRoot]) -> Result<()> {
        for p in self.llr.iter_mut() {
            p.reset();
        }
        for p in self.part.iter_mut() {
            p.reset();
        }
        self.active.iter_mut().for_each(|a| *a = false);
        for (r, root) in roots.iter().enumerate() {
            if root.llrs.len() != self.len {
                return Err(Error::LengthMismatch {
                    expected: self.len,
                    actual: root.llrs.len(),
                });
            }
            for layer in 0..=self.bits {
                self.path_llr[layer][r] = self.llr[layer].take();
                self.path_part[layer][r] = self.part[layer].take();
            }
            let slot = self.path_llr[0][r];
            let bits = self.bits;
            let dst = self.llr[0].slice_mut(slot);
            for (k, d) in dst.iter_mut().enumerate() {
                *d = clamp(root.llrs[bit_reverse(k, bits)]);
            }
            self.active[r] = true;
            self.metric[r] = root.metric;
        }
        Ok(())
    }

    fn calc_llr(&mut self, layer: usize, phase: usize, l: usize) {
        if layer == 0 {
            return;
        }
        let node = phase >> (self.bits - layer);
        if node % 2 == 0 {
            self.calc_llr(layer - 1, phase, l);
        }
        let size = self.len >> layer;
        let src_slot = self.path_llr[layer - 1][l];
        let dst_slot = self.llr[layer].own_fresh(self.path_llr[layer][l]);
        self.path_llr[layer][l] = dst_slot;
        let (upper, lower) = self.llr.split_at_mut(layer);
        let src = upper[layer - 1].slice(src_slot);
        let dst = lower[0].slice_mut(dst_slot);
        if node % 2 == 0 {
            for b in 0..size {
                dst[b] = f_node(src[b], src[b + size]);
            }
        } else {
            let left = &self.part[layer].slice(self.path_part[layer][l])[..size];
            for b in 0..size {
                dst[b] = g_node(src[b], src[b + size], left[b]);
            }
        }
    }

    fn set_leaf(&mut self, phase: usize, l: usize, b: u8) {
        let slot = self.part[self.bits].own_copy(self.path_part[self.bits][l]);
        self.path_part[self.bits][l] = slot;
        self.part[self.bits].slice_mut(slot)[phase % 2] = b;
    }

    fn leaf_llr(&self, l: usize) -> f64 {
        self.llr[self.bits].slice(self.path_llr[self.bits][l])[0]
    }

    fn record(&mut self, phase: usize, l: usize, parent: usize, b: u8) {
        self.parent[phase * self.list + l] = parent as u16;
        self.bit[phase * self.list + l] = b;
    }

    fn force<F: FnMut(usize, f64) -> u8>(&mut self, phase: usize, mut choose: F) {
        for l in 0..self.list {
            if !self.active[l] {
                continue;
            }
            let llr = self.leaf_llr(l);
            let b = choose(l, llr);
            self.metric[l] += decision_penalty(llr, b);
            self.set_leaf(phase, l, b);
            self.record(phase, l, l, b);
        }
    }

    fn fork(&mut self, phase: usize) {
        let live: Vec<usize> = (0..self.list).filter(|&l| self.active[l]).collect();
        if self.list == 1 {
            let l = live[0];
            let llr = self.leaf_llr(l);
            let b = hard_decision(llr);
            self.metric[l] += decision_penalty(llr, b);
            self.set_leaf(phase, l, b);
            self.record(phase, l, l, b);
            return;
        }
        let mut cands: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * live.len());
        for &l in &live {
            let llr = self.leaf_llr(l);
            // ties between the two branches of one path go to bit 0
            let first = hard_decision(llr);
            for b in [first, 1 - first] {
                cands.push((self.metric[l] + decision_penalty(llr, b), l, b));
            }
        }
        if cands.len() > self.list {
            cands.sort_by(|a, b| a.0.total_cmp(&b.0));
            cands.truncate(self.list);
        }
        let mut keep = vec![[None::<f64>; 2]; self.list];
        for &(m, l, b) in &cands {
            keep[l][b as usize] = Some(m);
        }
        for &l in &live {
            if keep[l] == [None, None] {
                self.kill(l);
            }
        }
        for &l in &live {
            match keep[l] {
                [Some(m0), Some(m1)] => {
                    let c = self.clone_path(l);
                    self.metric[l] = m0;
                    self.set_leaf(phase, l, 0);
                    self.record(phase, l, l, 0);
                    self.metric[c] = m1;
                    self.set_leaf(phase, c, 1);
                    self.record(phase, c, l, 1);
                }
                [Some(m), None] | [None, Some(m)] => {
                    let b = u8::from(keep[l][0].is_none());
                    self.metric[l] = m;
                    self.set_leaf(phase, l, b);
                    self.record(phase, l, l, b);
                }
                [None, None] => {}
            }
        }
    }

    fn kill(&mut self, l: usize) {
        self.active[l] = false;
        for layer in 0..=self.bits {
            self.llr[layer].release(self.path_llr[layer][l]);
            self.part[layer].release(self.path_part[layer][l]);
        }
    }

    fn clone_path(&mut self, l: usize) -> usize {
        let c = (0..self.list)
            .find(|&k| !self.active[k])
            .expect("free path slot");
        self.active[c] = true;
        for layer in 0..=self.bits {
            let (a, b) = (self.path_llr[layer][l], self.path_part[layer][l]);
            self.path_llr[layer][c] = a;
            self.path_part[layer][c] = b;
            self.llr[layer].refs[a] += 1;
            self.part[layer].refs[b] += 1;
        }
        c
    }

    fn update_part(&mut self, phase: usize, l: usize) {
        let mut layer = self.bits;
        loop {
            let node = phase >> (self.bits - layer);
            if node % 2 == 0 || layer == 1 {
                break;
            }
            let size = self.len >> layer;
            let side = (node >> 1) & 1;
            let src_slot = self.path_part[layer][l];
            let dst_slot = self.part[layer - 1].own_copy(self.path_part[layer - 1][l]);
            self.path_part[layer - 1][l] = dst_slot;
            let (upper, lower) = self.part.split_at_mut(layer);
            let src = lower[0].slice(src_slot);
            let dst =
                &mut upper[layer - 1].slice_mut(dst_slot)[side * 2 * size..(side + 1) * 2 * size];
            for b in 0..size {
                dst[b] = src[b] ^ src[size + b];
                dst[size + b] = src[size + b];
            }
            layer -= 1;
        }
    }

    fn collect(&self) -> Vec<Survivor> {
        let mut out: Vec<Survivor> = (0..self.list)
            .filter(|&l| self.active[l])
            .map(|l| {
                let mut u = vec![0u8; self.len];
                let mut p = l;
                for phase in (0..self.len).rev() {
                    u[phase] = self.bit[phase * self.list + p];
                    p = self.parent[phase * self.list + p] as usize;
                }
                Survivor {
                    u,
                    metric: self.metric[l],
                    root: p,
                }
            })
            .collect();
        out.sort_by(|a, b| a.metric.total_cmp(&b.metric));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::ScDecoder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_llrs(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * rng.gen_range(-1.0..3.0)).collect()
    }

    #[test]
    fn single_path_reproduces_sc() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for &n in &[2usize, 8, 64, 512] {
            let mut sc = ScDecoder::new(n).unwrap();
            let mut scl = ListDecoder::new(n, 1).unwrap();
            for _ in 0..20 {
                let llrs = noisy_llrs(&mut rng, n, 2.0);
                let roles: Vec<Role> = (0..n)
                    .map(|_| {
                        if rng.gen_bool(0.4) {
                            Role::Fixed(rng.gen_range(0..2))
                        } else {
                            Role::Free
                        }
                    })
                    .collect();
                let mut u = vec![0; n];
                sc.decode(&llrs, &mut u, |i, l| match roles[i] {
                    Role::Fixed(b) => b,
                    _ => hard_decision(l),
                })
                .unwrap();
                let out = scl
                    .run(&[ListRoot { llrs, metric: 0.0 }], &roles, None)
                    .unwrap();
                assert_eq!(out[0].u, u);
            }
        }
    }

    #[test]
    fn sampling_uses_the_shared_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 128;
        let llrs = noisy_llrs(&mut rng, n, 0.5);
        let roles = vec![Role::Sample; n];
        let mut dec = ListDecoder::new(n, 1).unwrap();
        let run = |dec: &mut ListDecoder, seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            dec.run(
                &[ListRoot {
                    llrs: llrs.clone(),
                    metric: 0.0,
                }],
                &roles,
                Some(&mut r),
            )
            .unwrap()
        };
        assert_eq!(run(&mut dec, 1), run(&mut dec, 1));
        assert_ne!(run(&mut dec, 1)[0].u, run(&mut dec, 2)[0].u);
        assert!(dec
            .run(&[ListRoot { llrs, metric: 0.0 }], &roles, None)
            .is_err());
    }

    #[test]
    fn saturated_posteriors_are_sampled_deterministically() {
        let n = 32;
        let llrs = vec![1e6; n];
        let mut dec = ListDecoder::new(n, 1).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let out = dec
            .run(
                &[ListRoot { llrs, metric: 0.0 }],
                &vec![Role::Sample; n],
                Some(&mut r),
            )
            .unwrap();
        assert_eq!(out[0].u, vec![0; n]);
    }

    #[test]
    fn roots_are_tracked_through_forks() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 16;
        let a = noisy_llrs(&mut rng, n, 1.0);
        let b: Vec<f64> = a.iter().map(|x| -x).collect();
        let roles = vec![Role::Free; n];
        let mut dec = ListDecoder::new(n, 8).unwrap();
        let both = dec
            .run(
                &[
                    ListRoot {
                        llrs: a.clone(),
                        metric: 0.0,
                    },
                    ListRoot {
                        llrs: b,
                        metric: 50.0,
                    },
                ],
                &roles,
                None,
            )
            .unwrap();
        let single = dec
            .run(
                &[ListRoot {
                    llrs: a,
                    metric: 0.0,
                }],
                &roles,
                None,
            )
            .unwrap();
        assert_eq!(both[0].root, 0);
        assert_eq!(both[0].u, single[0].u);
        assert!(both.iter().all(|s| s.root < 2));
        assert!(both.windows(2).all(|w| w[0].metric <= w[1].metric));
    }

    #[test]
    fn larger_lists_never_lose_the_best_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 64;
        let roles: Vec<Role> = (0..n)
            .map(|i| if i < 24 { Role::Fixed(0) } else { Role::Free })
            .collect();
        for _ in 0..30 {
            let llrs = noisy_llrs(&mut rng, n, 0.8);
            let mut prev = f64::INFINITY;
            for l in [1, 2, 4, 8, 16] {
                let mut dec = ListDecoder::new(n, l).unwrap();
                let m = dec
                    .run(
                        &[ListRoot {
                            llrs: llrs.clone(),
                            metric: 0.0,
                        }],
                        &roles,
                        None,
                    )
                    .unwrap()[0]
                    .metric;
                assert!(m <= prev + 1e-9);
                prev = m;
            }
        }
    }
}
