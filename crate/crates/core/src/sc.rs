//! Encoding and successive-cancellation decoding.
//!
//! The encoder is the kernel's butterfly applied recursively,
//! `enc(a, b) = (combine(enc(a), enc(b)), enc(b))` on the two halves of `u`,
//! followed by the bit-reversal permutation of the codeword. For `q = 2` and
//! modulo-2 addition this is `x = u B_N F^{(x)n}`. Input position `i` then sees
//! subchannel `i` of [`construct`](crate::construct).
//!
//! Trials are driven by [`ChaCha8Rng`]: trial `t` uses the generator seeded
//! with `seed` on stream `t`, so reports do not depend on scheduling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alphabet::{KernelSpec, Symbol};
use crate::channel::{ChannelFamily, JointDist};
use crate::construct::CodeSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrialReport {
    pub trials: u64,
    pub block_errors: u64,
    pub fer: f64,
    pub seed: u64,
}

fn bit_reverse(i: usize, n: usize) -> usize {
    if n == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS as usize - n)
    }
}

fn log2_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::domain(format!("block length {len} is not a power of two")));
    }
    Ok(len.trailing_zeros() as usize)
}

fn butterflies(k: &KernelSpec, v: &mut [Symbol]) {
    let len = v.len();
    if len == 1 {
        return;
    }
    let h = len / 2;
    let (a, b) = v.split_at_mut(h);
    butterflies(k, a);
    butterflies(k, b);
    for (x, &y) in a.iter_mut().zip(b.iter()) {
        *x = k.encode_first(*x, y);
    }
}

/// Codeword of `u` (length `2^n`).
pub fn encode(u: &[Symbol], k: &KernelSpec) -> Result<Vec<Symbol>> {
    let n = log2_len(u.len())?;
    if let Some(&s) = u.iter().find(|&&s| s >= k.q()) {
        return Err(Error::domain(format!("symbol {s} out of range for q = {}", k.q())));
    }
    let mut v = u.to_vec();
    butterflies(k, &mut v);
    Ok((0..u.len()).map(|i| v[bit_reverse(i, n)]).collect())
}

/// Recursive SC on posteriors `p` (row-major, `len x q`). Writes decisions to
/// `u` and returns the re-encoded partial codeword.
fn decode_rec(k: &KernelSpec, p: &[f64], frozen: &[bool], u: &mut [Symbol]) -> Vec<Symbol> {
    let q = k.q();
    let len = frozen.len();
    if len == 1 {
        let s = if frozen[0] {
            0
        } else {
            let mut best = 0;
            for x in 1..q {
                if p[x] > p[best] {
                    best = x;
                }
            }
            best
        };
        u[0] = s;
        return vec![s];
    }
    let h = len / 2;
    let (pa, pb) = p.split_at(h * q);
    let mut m = vec![0.0; h * q];
    for t in 0..h {
        let (ra, rb) = (&pa[t * q..(t + 1) * q], &pb[t * q..(t + 1) * q]);
        let out = &mut m[t * q..(t + 1) * q];
        for (a, o) in out.iter_mut().enumerate() {
            let enc = k.encode_row(a);
            *o = (0..q).map(|b| ra[enc[b] as usize] * rb[b]).sum();
        }
        normalize(out);
    }
    let (ua, ub) = u.split_at_mut(h);
    let xa = decode_rec(k, &m, &frozen[..h], ua);
    for t in 0..h {
        let (ra, rb) = (&pa[t * q..(t + 1) * q], &pb[t * q..(t + 1) * q]);
        let enc = k.encode_row(xa[t]);
        let out = &mut m[t * q..(t + 1) * q];
        for (b, o) in out.iter_mut().enumerate() {
            *o = ra[enc[b] as usize] * rb[b];
        }
        normalize(out);
    }
    let xb = decode_rec(k, &m, &frozen[h..], ub);
    let mut x: Vec<Symbol> = xa.iter().zip(&xb).map(|(&a, &b)| k.encode_first(a, b)).collect();
    x.extend_from_slice(&xb);
    x
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|v| *v /= s);
    } else {
        // every hypothesis excluded: fall back to uniform
        let u = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|v| *v = u);
    }
}

/// SC estimate of the input vector from channel outputs `y` of `w`.
/// Frozen positions are decoded as 0.
pub fn sc_decode(y: &[usize], w: &JointDist, code: &CodeSpec) -> Result<Vec<Symbol>> {
    let k = &code.kernel;
    if w.q() != k.q() {
        return Err(Error::domain(format!("channel has q = {} but kernel has q = {}", w.q(), k.q())));
    }
    let n = code.n;
    if y.len() != code.block_len() {
        return Err(Error::domain(format!("received {} symbols, block length is {}", y.len(), code.block_len())));
    }
    let q = k.q();
    let mut p = Vec::with_capacity(y.len() * q);
    for i in 0..y.len() {
        let s = y[bit_reverse(i, n)];
        if s >= w.out_size() {
            return Err(Error::domain(format!("output symbol {s} out of range")));
        }
        p.extend_from_slice(w.posterior(s));
    }
    let mut u = vec![0; y.len()];
    decode_rec(k, &p, &code.frozen_mask(), &mut u);
    Ok(u)
}

/// Samples `W(.|x)` for every input `x`.
pub struct ChannelSampler {
    dists: Vec<WeightedIndex<f64>>,
}

impl ChannelSampler {
    pub fn new(w: &JointDist) -> Result<Self> {
        let dists = (0..w.q())
            .map(|x| {
                let row: Vec<f64> = (0..w.out_size()).map(|y| w.transition(y, x)).collect();
                WeightedIndex::new(row).map_err(|e| Error::domain(format!("input {x}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(ChannelSampler { dists })
    }

    pub fn sample<R: Rng>(&self, x: Symbol, rng: &mut R) -> usize {
        self.dists[x].sample(rng)
    }
}

/// Monte-Carlo frame error rate of `code` on `family`.
pub fn simulate_fer(code: &CodeSpec, family: &ChannelFamily, trials: u64, seed: u64) -> Result<TrialReport> {
    if trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    let w = family.build()?;
    let sampler = ChannelSampler::new(&w)?;
    let q = code.kernel.q();
    let big_n = code.block_len();
    let errors = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let mut u = vec![0; big_n];
            for &i in &code.info {
                u[i] = rng.gen_range(0..q);
            }
            let x = encode(&u, &code.kernel)?;
            let y: Vec<usize> = x.iter().map(|&s| sampler.sample(s, &mut rng)).collect();
            let u_hat = sc_decode(&y, &w, code)?;
            Ok(u64::from(u_hat != u))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    Ok(TrialReport {
        trials,
        block_errors: errors,
        fer: errors as f64 / trials as f64,
        seed,
    })
}
