//! Construction of all `N = 2^n` synthetic subchannels.
//!
//! Subchannel `i` (0-based) is reached from the root by reading the `n` bits of
//! `i` from the most significant down: bit 0 selects the `-` transform, bit 1
//! the `+` transform. Every step is followed by the alphabet reductions of the
//! chosen [`MergePolicy`].

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::alphabet::{KernelSpec, ShiftGroup};
use crate::channel::JointDist;
use crate::error::{Error, Result};
use crate::merge::{degrade, plus_premerge, reduce_no_loss_in, MergePolicy, DEFAULT_TOL};
use crate::transform::{minus_transform, plus_transform};

#[derive(Clone, Debug, PartialEq)]
pub struct SubchannelRecord {
    pub index: usize,
    /// Symmetric capacity in bits.
    pub capacity: f64,
    /// `H(X|Y)` in bits.
    pub entropy: f64,
    /// Bhattacharyya parameter, binary inputs only.
    pub z_binary: Option<f64>,
    pub out_size: usize,
}

/// Per-level summary of a full construction.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    /// Tree depth `l`; the level holds `2^l` subchannels.
    pub level: usize,
    pub mean_capacity: f64,
    /// Time since the start of the construction when the level was complete.
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub records: Vec<SubchannelRecord>,
    pub levels: Vec<LevelStats>,
}

#[derive(Clone, Debug)]
pub struct CodeSpec {
    pub n: usize,
    pub kernel: KernelSpec,
    /// Sorted.
    pub frozen: Vec<usize>,
    /// Sorted.
    pub info: Vec<usize>,
    pub mu: usize,
    pub policy: MergePolicy,
}

impl CodeSpec {
    pub fn block_len(&self) -> usize {
        1 << self.n
    }

    /// Information bits per channel use.
    pub fn rate_bits(&self) -> f64 {
        self.info.len() as f64 * (self.kernel.q() as f64).log2() / self.block_len() as f64
    }

    /// `true` at frozen positions.
    pub fn frozen_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.block_len()];
        for &i in &self.info {
            mask[i] = false;
        }
        mask
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Selection {
    /// Largest capacities.
    #[default]
    Capacity,
    /// Smallest Bhattacharyya parameters (binary inputs only).
    Bhattacharyya,
}

fn reduce(d: JointDist, policy: &MergePolicy, group: ShiftGroup) -> Result<JointDist> {
    let d = if policy.cyclic_no_loss {
        reduce_no_loss_in(&d, group, DEFAULT_TOL)
    } else {
        d
    };
    let mut out = degrade(&d, policy, group)?;
    out.plus = None;
    Ok(out)
}

fn step(d: &JointDist, k: &KernelSpec, plus: bool, policy: &MergePolicy) -> Result<JointDist> {
    let group = k.shift_group();
    let t = if plus {
        let t = plus_transform(d, k)?;
        if policy.plus_premerge && k.is_mod_add() {
            plus_premerge(&t)?
        } else {
            t
        }
    } else {
        minus_transform(d, k)?
    };
    reduce(t, policy, group)
}

fn root(d: &JointDist, k: &KernelSpec, policy: &MergePolicy) -> Result<JointDist> {
    if d.q() != k.q() {
        return Err(Error::domain(format!(
            "channel has q = {} but kernel has q = {}",
            d.q(),
            k.q()
        )));
    }
    policy.validate(d.q())?;
    let mut out = degrade(d, policy, k.shift_group())?;
    out.plus = None;
    Ok(out)
}

/// The approximation of subchannel `i` of `2^n`.
pub fn construct_subchannel(
    d: &JointDist,
    k: &KernelSpec,
    n: usize,
    i: usize,
    policy: &MergePolicy,
) -> Result<JointDist> {
    if n >= usize::BITS as usize || i >> n != 0 {
        return Err(Error::domain(format!("index {i} out of range for n = {n}")));
    }
    let mut t = root(d, k, policy)?;
    for j in (0..n).rev() {
        t = step(&t, k, (i >> j) & 1 == 1, policy)?;
    }
    Ok(t)
}

fn record(index: usize, d: &JointDist) -> SubchannelRecord {
    let log_q = (d.q() as f64).log2();
    let entropy = d.conditional_entropy().clamp(0.0, log_q);
    SubchannelRecord {
        index,
        capacity: log_q - entropy,
        entropy,
        z_binary: d.bhattacharyya_binary().ok(),
        out_size: d.out_size(),
    }
}

/// Records of all `2^n` subchannels in index order, on the global thread pool.
pub fn construct_all(d: &JointDist, k: &KernelSpec, n: usize, policy: &MergePolicy) -> Result<Vec<SubchannelRecord>> {
    Ok(construct_tree(d, k, n, policy)?.records)
}

/// [`construct_all`] on a dedicated pool of `threads` workers (0 = rayon default).
pub fn construct_all_threads(
    d: &JointDist,
    k: &KernelSpec,
    n: usize,
    policy: &MergePolicy,
    threads: usize,
) -> Result<Construction> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::domain(format!("cannot start thread pool: {e}")))?;
    pool.install(|| construct_tree(d, k, n, policy))
}

/// Breadth-first evaluation of the whole tree with per-level statistics.
pub fn construct_tree(d: &JointDist, k: &KernelSpec, n: usize, policy: &MergePolicy) -> Result<Construction> {
    if n == 0 || n >= 32 {
        return Err(Error::domain(format!("n = {n} must be in 1..32")));
    }
    let start = Instant::now();
    let mut level = vec![root(d, k, policy)?];
    let mut levels = Vec::with_capacity(n);
    for l in 1..=n {
        let children: Vec<(JointDist, JointDist)> = level
            .par_iter()
            .map(|t| Ok((step(t, k, false, policy)?, step(t, k, true, policy)?)))
            .collect::<Result<_>>()?;
        level = children.into_iter().flat_map(|(a, b)| [a, b]).collect();
        let mean = level.iter().map(JointDist::symmetric_capacity).sum::<f64>() / level.len() as f64;
        levels.push(LevelStats {
            level: l,
            mean_capacity: mean,
            elapsed: start.elapsed(),
        });
    }
    let records = level.par_iter().enumerate().map(|(i, t)| record(i, t)).collect();
    Ok(Construction { records, levels })
}

/// Splits the indices into `k_info` information positions and frozen positions.
/// Ties are broken in favour of the smaller index.
pub fn select_code(
    records: &[SubchannelRecord],
    k_info: usize,
    kernel: &KernelSpec,
    policy: &MergePolicy,
    mode: Selection,
) -> Result<CodeSpec> {
    let big_n = records.len();
    if !big_n.is_power_of_two() {
        return Err(Error::domain(format!("{big_n} records is not a power of two")));
    }
    if k_info > big_n {
        return Err(Error::domain(format!("k_info = {k_info} exceeds N = {big_n}")));
    }
    let mut order: Vec<&SubchannelRecord> = records.iter().collect();
    match mode {
        Selection::Capacity => {
            order.sort_by(|a, b| b.capacity.total_cmp(&a.capacity).then(a.index.cmp(&b.index)));
        }
        Selection::Bhattacharyya => {
            if records.iter().any(|r| r.z_binary.is_none()) {
                return Err(Error::Unsupported("Bhattacharyya selection needs binary inputs".into()));
            }
            order.sort_by(|a, b| {
                a.z_binary
                    .unwrap()
                    .total_cmp(&b.z_binary.unwrap())
                    .then(a.index.cmp(&b.index))
            });
        }
    }
    let mut info: Vec<usize> = order[..k_info].iter().map(|r| r.index).collect();
    info.sort_unstable();
    let mut frozen: Vec<usize> = order[k_info..].iter().map(|r| r.index).collect();
    frozen.sort_unstable();
    Ok(CodeSpec {
        n: big_n.trailing_zeros() as usize,
        kernel: kernel.clone(),
        frozen,
        info,
        mu: policy.mu,
        policy: *policy,
    })
}
