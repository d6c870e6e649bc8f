//! Output-alphabet reduction.
//!
//! Everything here maps a [`JointDist`] to a degraded (or equivalent) one with
//! fewer output symbols:
//!
//! * [`merge_pair`] merges two symbols, optionally shifting the second
//!   posterior by an element of the kernel's [`ShiftGroup`];
//! * [`reduce_no_loss`] and [`plus_premerge`] merge symbols whose posteriors
//!   are translates of one another, which leaves `H(X|Y)` of every descendant
//!   channel unchanged;
//! * [`degrade`] runs a [`MergePolicy`] until at most `mu` symbols remain.
//!
//! All merge costs are `ΔH = (p1 + p2) H(merged) - p1 H(y1) - p2 H(y2)` in bits.

mod greedy;
mod kdtree;

use std::collections::HashMap;

use crate::alphabet::{negate, ShiftGroup, Symbol};
use crate::channel::{JointDist, PlusLabels};
use crate::error::{Error, Result};

use greedy::Engine;

pub use greedy::{exact_limit, EXACT_LIMIT};

/// Quantum used to match posteriors that are translates of one another.
pub const DEFAULT_TOL: f64 = 1e-12;

/// How `degrade` picks the symbols to merge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MergeRule {
    /// Minimize `ΔH` over all pairs and all shifts of the kernel's shift group.
    GreedyExact,
    /// Minimize `ΔH` over pairs, without shifting (plain greedy mass merging).
    GreedyPairsOnly,
    /// Merge the first pair passing the mass and l1 proximity tests.
    ThresholdL1 { c1: f64, c2: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergePolicy {
    pub rule: MergeRule,
    /// Output alphabet budget.
    pub mu: usize,
    /// Collapse translate-equivalent outputs before every `degrade`.
    pub cyclic_no_loss: bool,
    /// Pair `(v, y1, y2)` with `(-v, y2, y1)` after `+` steps (modular kernels only).
    pub plus_premerge: bool,
}

impl MergePolicy {
    /// Shift-aware greedy merging with both lossless pre-reductions.
    pub fn algorithm2(mu: usize) -> Self {
        MergePolicy {
            rule: MergeRule::GreedyExact,
            mu,
            cyclic_no_loss: true,
            plus_premerge: true,
        }
    }

    /// Plain greedy mass merging.
    pub fn plain_greedy(mu: usize) -> Self {
        MergePolicy {
            rule: MergeRule::GreedyPairsOnly,
            mu,
            cyclic_no_loss: false,
            plus_premerge: false,
        }
    }

    pub fn threshold_l1(mu: usize, c1: f64, c2: f64) -> Self {
        MergePolicy {
            rule: MergeRule::ThresholdL1 { c1, c2 },
            mu,
            cyclic_no_loss: false,
            plus_premerge: false,
        }
    }

    /// No merging at all (exact evolution).
    pub fn unbounded() -> Self {
        MergePolicy {
            mu: usize::MAX,
            ..MergePolicy::plain_greedy(0)
        }
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if self.mu < q {
            return Err(Error::domain(format!("mu = {} must be at least q = {q}", self.mu)));
        }
        if let MergeRule::ThresholdL1 { c1, c2 } = self.rule {
            if !(c1 > 0.0 && c2 > 0.0) {
                return Err(Error::domain("threshold constants c1, c2 must be positive"));
            }
        }
        Ok(())
    }
}

/// `sum_x p(x) ln p(x)`.
#[inline]
pub(crate) fn neg_entropy_nats(row: &[f64]) -> f64 {
    row.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum()
}

/// `ΔH` in bits from the masses, rows and cached [`neg_entropy_nats`] of both symbols.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn merge_cost_rows(
    q: usize,
    group: ShiftGroup,
    pa: f64,
    ha: f64,
    a: &[f64],
    pb: f64,
    hb: f64,
    b: &[f64],
    u: Symbol,
) -> f64 {
    let t = pa + pb;
    let wb = pb / t;
    let mut hm = 0.0;
    for x in 0..q {
        let ax = a[x];
        let m = ax + wb * (b[group.apply(q, x, u)] - ax);
        if m > 0.0 {
            hm += m * m.ln();
        }
    }
    ((pa * ha + pb * hb - t * hm) * std::f64::consts::LOG2_E).max(0.0)
}

fn check_pair(d: &JointDist, y1: usize, y2: usize) -> Result<()> {
    let m = d.out_size();
    if y1 >= m || y2 >= m {
        return Err(Error::domain(format!("output index out of range (M = {m})")));
    }
    if y1 == y2 {
        return Err(Error::domain("cannot merge a symbol with itself"));
    }
    Ok(())
}

/// `ΔH` of merging `y1` with `y2` shifted by `u`.
pub fn merge_cost(d: &JointDist, group: ShiftGroup, y1: usize, y2: usize, u: Symbol) -> Result<f64> {
    check_pair(d, y1, y2)?;
    if u >= group.size(d.q()) {
        return Err(Error::domain(format!("shift {u} out of range")));
    }
    let (a, b) = (d.posterior(y1), d.posterior(y2));
    Ok(merge_cost_rows(
        d.q(),
        group,
        d.py()[y1],
        neg_entropy_nats(a),
        a,
        d.py()[y2],
        neg_entropy_nats(b),
        b,
        u,
    ))
}

/// Merges `y1` and `y2` into one symbol placed at `min(y1, y2)`, with posterior
/// `(p1 post[y1][x] + p2 post[y2][x + u mod q]) / (p1 + p2)`.
pub fn merge_pair(d: &JointDist, y1: usize, y2: usize, u: Symbol) -> Result<JointDist> {
    merge_pair_in(d, ShiftGroup::Cyclic, y1, y2, u)
}

/// [`merge_pair`] with the shift acting through `group`.
pub fn merge_pair_in(d: &JointDist, group: ShiftGroup, y1: usize, y2: usize, u: Symbol) -> Result<JointDist> {
    check_pair(d, y1, y2)?;
    let q = d.q();
    if u >= q {
        return Err(Error::domain(format!("shift {u} out of range for q = {q}")));
    }
    let (p1, p2) = (d.py()[y1], d.py()[y2]);
    let t = p1 + p2;
    let (r1, r2) = (d.posterior(y1), d.posterior(y2));
    let mut merged: Vec<f64> = (0..q).map(|x| (p1 * r1[x] + p2 * r2[group.apply(q, x, u)]) / t).collect();
    let s: f64 = merged.iter().sum();
    merged.iter_mut().for_each(|v| *v /= s);
    let (keep, drop) = (y1.min(y2), y1.max(y2));
    let mut py = Vec::with_capacity(d.out_size() - 1);
    let mut post = Vec::with_capacity((d.out_size() - 1) * q);
    for y in 0..d.out_size() {
        if y == drop {
            continue;
        }
        if y == keep {
            py.push(t);
            post.extend_from_slice(&merged);
        } else {
            py.push(d.py()[y]);
            post.extend_from_slice(d.posterior(y));
        }
    }
    Ok(JointDist::from_parts(q, py, post))
}

/// Upper bound `(p1 + p2) / ln 2 * ||post[y1] - post[y2]||_1` (bits) on the
/// capacity lost by merging `y1` and `y2` without a shift.
pub fn l1_loss_bound(d: &JointDist, y1: usize, y2: usize) -> Result<f64> {
    check_pair(d, y1, y2)?;
    let l1: f64 = d
        .posterior(y1)
        .iter()
        .zip(d.posterior(y2))
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((d.py()[y1] + d.py()[y2]) / std::f64::consts::LN_2 * l1)
}

pub(crate) fn quantize_row(row: &[f64], tol: f64, out: &mut Vec<i64>) {
    out.clear();
    if tol > 0.0 {
        out.extend(row.iter().map(|&v| (v / tol).round() as i64));
    } else {
        out.extend(row.iter().map(|&v| v.to_bits() as i64));
    }
}

/// Shift `s` maximizing `(key[x + s])_x` lexicographically; smallest `s` on ties.
pub(crate) fn canonical_shift(key: &[i64], group: ShiftGroup) -> Symbol {
    let q = key.len();
    let mut best = 0;
    for s in 1..group.size(q) {
        for x in 0..q {
            let (c, b) = (key[group.apply(q, x, s)], key[group.apply(q, x, best)]);
            if c != b {
                if c > b {
                    best = s;
                }
                break;
            }
        }
    }
    best
}

/// Lexicographically greatest cyclic rotation `c[x] = p[x + s mod q]` of `p`
/// (entries compared after rounding to [`DEFAULT_TOL`]), and the shift `s`.
pub fn canonicalize_cyclic(p: &[f64]) -> (Vec<f64>, Symbol) {
    canonicalize_in(p, ShiftGroup::Cyclic, DEFAULT_TOL)
}

pub fn canonicalize_in(p: &[f64], group: ShiftGroup, tol: f64) -> (Vec<f64>, Symbol) {
    let q = p.len();
    let mut key = Vec::with_capacity(q);
    quantize_row(p, tol, &mut key);
    let s = canonical_shift(&key, group);
    ((0..q).map(|x| p[group.apply(q, x, s)]).collect(), s)
}

/// Collapses every class of outputs whose posteriors are cyclic translates of
/// each other (entries matched after rounding to multiples of `tol`; exact
/// bit equality when `tol == 0`).
pub fn reduce_no_loss(d: &JointDist, tol: f64) -> JointDist {
    reduce_no_loss_in(d, ShiftGroup::Cyclic, tol)
}

/// [`reduce_no_loss`] for an arbitrary shift group. Each class is represented
/// by its first member; later members are folded in with the translating shift.
pub fn reduce_no_loss_in(d: &JointDist, group: ShiftGroup, tol: f64) -> JointDist {
    let q = d.q();
    let m = d.out_size();
    let mut classes: HashMap<Vec<i64>, usize> = HashMap::with_capacity(m);
    let mut rep_shift: Vec<Symbol> = Vec::new();
    let mut py: Vec<f64> = Vec::new();
    let mut acc: Vec<f64> = Vec::new();
    let mut key = Vec::with_capacity(q);
    for y in 0..m {
        let row = d.posterior(y);
        quantize_row(row, tol, &mut key);
        let s = canonical_shift(&key, group);
        let canon: Vec<i64> = (0..q).map(|x| key[group.apply(q, x, s)]).collect();
        let p = d.py()[y];
        match classes.get(&canon) {
            Some(&c) => {
                let u = group.relative(q, s, rep_shift[c]);
                let dst = &mut acc[c * q..(c + 1) * q];
                for (x, v) in dst.iter_mut().enumerate() {
                    *v += p * row[group.apply(q, x, u)];
                }
                py[c] += p;
            }
            None => {
                classes.insert(canon, py.len());
                rep_shift.push(s);
                py.push(p);
                acc.extend(row.iter().map(|v| p * v));
            }
        }
    }
    if py.len() == m {
        let mut out = d.clone();
        out.plus = None;
        return out;
    }
    for (c, &p) in py.iter().enumerate() {
        let row = &mut acc[c * q..(c + 1) * q];
        let s: f64 = row.iter().sum();
        debug_assert!(s > 0.0 && (s / p - 1.0).abs() < 1e-9);
        row.iter_mut().for_each(|v| *v /= s);
    }
    JointDist::from_parts(q, py, acc)
}

/// Merges each output `(v, i, j)` of a modular `+` transform with `(-v, j, i)`.
/// The posterior of the partner is the translate by `v` of that of `(v, i, j)`,
/// so the merge is lossless. The result keeps the labels of the survivors.
pub fn plus_premerge(d_plus: &JointDist) -> Result<JointDist> {
    let labels = d_plus
        .plus
        .as_ref()
        .ok_or_else(|| Error::domain("plus_premerge needs the output of a `+` transform"))?;
    if !labels.modular {
        return Err(Error::domain("plus_premerge applies to modulo-q addition kernels only"));
    }
    let q = d_plus.q();
    let m = labels.inner as u64;
    let mm = m * m;
    let size = q as u64 * mm;
    let mut pos = vec![u32::MAX; size as usize];
    for (p, &id) in labels.ids.iter().enumerate() {
        pos[id as usize] = p as u32;
    }
    let n = d_plus.out_size();
    let mut absorbed = vec![false; n];
    let mut py = Vec::with_capacity(n / 2 + 1);
    let mut post = Vec::with_capacity((n / 2 + 1) * q);
    let mut ids = Vec::with_capacity(n / 2 + 1);
    for p in 0..n {
        if absorbed[p] {
            continue;
        }
        let id = labels.ids[p];
        let (v, i, j) = (id / mm, (id % mm) / m, id % m);
        let partner = negate(q, v as usize) as u64 * mm + j * m + i;
        let pp = pos[partner as usize];
        let row = d_plus.posterior(p);
        let pr = d_plus.py()[p];
        if pp == u32::MAX || pp as usize == p {
            py.push(pr);
            post.extend_from_slice(row);
        } else {
            let pp = pp as usize;
            absorbed[pp] = true;
            let (p2, r2) = (d_plus.py()[pp], d_plus.posterior(pp));
            let t = pr + p2;
            let start = post.len();
            for x in 0..q {
                post.push((pr * row[x] + p2 * r2[(x + v as usize) % q]) / t);
            }
            let s: f64 = post[start..].iter().sum();
            post[start..].iter_mut().for_each(|e| *e /= s);
            py.push(t);
        }
        ids.push(id);
    }
    let mut out = JointDist::from_parts(q, py, post);
    out.plus = Some(PlusLabels {
        inner: labels.inner,
        modular: true,
        ids,
    });
    Ok(out)
}

/// The triple `(y1, y2, u)`, `y1 < y2`, minimizing `ΔH` over all pairs and all
/// cyclic shifts; ties go to the lexicographically smallest triple.
pub fn choose(d: &JointDist) -> Result<(usize, usize, Symbol)> {
    choose_in(d, ShiftGroup::Cyclic)
}

pub fn choose_in(d: &JointDist, group: ShiftGroup) -> Result<(usize, usize, Symbol)> {
    let m = d.out_size();
    if m < 2 {
        return Err(Error::domain("choose needs at least two output symbols"));
    }
    let q = d.q();
    let h: Vec<f64> = (0..m).map(|y| neg_entropy_nats(d.posterior(y))).collect();
    let mut best = (f64::INFINITY, 0, 1, 0);
    for y1 in 0..m {
        for y2 in y1 + 1..m {
            for u in 0..group.size(q) {
                let (a, b) = (d.posterior(y1), d.posterior(y2));
                let c = merge_cost_rows(q, group, d.py()[y1], h[y1], a, d.py()[y2], h[y2], b, u);
                if c < best.0 {
                    best = (c, y1, y2, u);
                }
            }
        }
    }
    Ok((best.1, best.2, best.3))
}

/// Reduces `d` to at most `policy.mu` outputs. `group` is the kernel's shift
/// group; it is only used by [`MergeRule::GreedyExact`].
///
/// Up to [`exact_limit`]`(mu)` live symbols, greedy rules are exact: each step
/// merges the triple [`choose_in`] would return. Above it, candidate pairs are
/// drawn from the nearest neighbours of each symbol in the square-root
/// posterior embedding (rebuilt each time the alphabet shrinks fourfold) and
/// merged cheapest first. Rows that agree to [`DEFAULT_TOL`] are merged before
/// the neighbour search.
pub fn degrade(d: &JointDist, policy: &MergePolicy, group: ShiftGroup) -> Result<JointDist> {
    policy.validate(d.q())?;
    if d.out_size() <= policy.mu {
        return Ok(d.clone());
    }
    let q = d.q();
    let out = match policy.rule {
        MergeRule::GreedyExact => {
            let mut e = Engine::new(d, group);
            e.greedy(policy.mu);
            e.finish()
        }
        MergeRule::GreedyPairsOnly => {
            let mut e = Engine::new(d, ShiftGroup::Trivial);
            e.greedy(policy.mu);
            e.finish()
        }
        MergeRule::ThresholdL1 { c1, c2 } => {
            let l1_max = c2 * (1.0 / policy.mu as f64).powf(1.0 / (q as f64 - 1.0));
            let mut e = Engine::new(d, ShiftGroup::Trivial);
            e.threshold(policy.mu, c1, l1_max);
            if e.live() > policy.mu {
                e.greedy(policy.mu);
            }
            e.finish()
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests;
