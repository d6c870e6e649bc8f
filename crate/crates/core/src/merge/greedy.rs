//! Mutable working state for `degrade`: slot-addressed output symbols that are
//! merged in place, plus the greedy and threshold merge loops.
//!
//! Slots keep their original order; a merge of slots `a < b` stores the result
//! in `a` and kills `b`, so the relative order of survivors always equals the
//! index order of the equivalent compacted distribution.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::alphabet::ShiftGroup;
use crate::channel::JointDist;

use super::kdtree::KdTree;
use super::{canonical_shift, merge_cost_rows, neg_entropy_nats, quantize_row, DEFAULT_TOL};

/// Cap on [`exact_limit`].
pub const EXACT_LIMIT: usize = 512;

/// Below this many live symbols every pair is a candidate, which makes the
/// greedy loop identical to repeatedly calling `choose`: `2 mu`, clamped to
/// `64..=EXACT_LIMIT`.
pub fn exact_limit(mu: usize) -> usize {
    mu.saturating_mul(2).clamp(64, EXACT_LIMIT)
}

/// Neighbours per symbol in the candidate graph used above the exact limit.
const KNN: usize = 5;
/// Upper bound on a merged symbol's candidate list.
const LIST_CAP: usize = 16;

#[derive(Clone, Copy, Debug)]
struct Cand {
    cost: f64,
    a: u32,
    b: u32,
    u: u16,
    sa: u32,
    sb: u32,
    /// Symbol whose neighbour list produced this candidate.
    owner: u32,
}

/// Cached edge from a symbol to neighbour `n`, valid while `n`'s stamp is `stamp`.
#[derive(Clone, Copy, Debug)]
struct Edge {
    n: u32,
    stamp: u32,
    cost: f64,
    u: u16,
}

impl Edge {
    fn stale(n: u32) -> Self {
        Edge {
            n,
            stamp: u32::MAX,
            cost: f64::INFINITY,
            u: 0,
        }
    }
}

impl Cand {
    fn key(&self) -> (f64, u32, u32, u16) {
        (self.cost, self.a, self.b, self.u)
    }
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    // reversed: BinaryHeap pops the smallest (cost, a, b, u)
    fn cmp(&self, other: &Self) -> Ordering {
        let (c1, a1, b1, u1) = self.key();
        let (c2, a2, b2, u2) = other.key();
        c2.total_cmp(&c1)
            .then(a2.cmp(&a1))
            .then(b2.cmp(&b1))
            .then(u2.cmp(&u1))
    }
}

pub(crate) struct Engine {
    q: usize,
    group: ShiftGroup,
    py: Vec<f64>,
    post: Vec<f64>,
    /// `sum p ln p` of each row.
    h: Vec<f64>,
    /// Canonical shift of each row, maintained while `aligned` is set.
    cshift: Vec<u16>,
    /// Only try the shift aligning the canonical forms of a pair.
    aligned: bool,
    alive: Vec<bool>,
    stamp: Vec<u32>,
    parent: Vec<u32>,
    live: usize,
}

impl Engine {
    pub fn new(d: &JointDist, group: ShiftGroup) -> Self {
        let (q, py, post) = d.clone().into_parts();
        let m = py.len();
        let h = post.chunks_exact(q).map(neg_entropy_nats).collect();
        Engine {
            q,
            group,
            py,
            post,
            h,
            cshift: Vec::new(),
            aligned: false,
            alive: vec![true; m],
            stamp: vec![0; m],
            parent: (0..m as u32).collect(),
            live: m,
        }
    }

    pub fn live(&self) -> usize {
        self.live
    }

    fn row(&self, y: u32) -> &[f64] {
        &self.post[y as usize * self.q..(y as usize + 1) * self.q]
    }

    /// Cheapest shift for merging slots `a < b`; ties go to the smaller shift.
    fn best_edge(&self, a: u32, b: u32) -> (f64, u16) {
        let (ra, rb) = (self.row(a), self.row(b));
        let (ai, bi) = (a as usize, b as usize);
        let (pa, pb) = (self.py[ai], self.py[bi]);
        let (ha, hb) = (self.h[ai], self.h[bi]);
        if self.aligned {
            let u = self.group.relative(self.q, self.cshift[bi] as usize, self.cshift[ai] as usize);
            return (merge_cost_rows(self.q, self.group, pa, ha, ra, pb, hb, rb, u), u as u16);
        }
        let mut best = (f64::INFINITY, 0u16);
        for u in 0..self.group.size(self.q) {
            let c = merge_cost_rows(self.q, self.group, pa, ha, ra, pb, hb, rb, u);
            if c < best.0 {
                best = (c, u as u16);
            }
        }
        best
    }

    fn cand(&self, x: u32, y: u32) -> Cand {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let (cost, u) = self.best_edge(a, b);
        Cand {
            cost,
            a,
            b,
            u,
            sa: self.stamp[a as usize],
            sb: self.stamp[b as usize],
            owner: a,
        }
    }

    fn valid(&self, c: &Cand) -> bool {
        let (a, b) = (c.a as usize, c.b as usize);
        self.alive[a] && self.alive[b] && self.stamp[a] == c.sa && self.stamp[b] == c.sb
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Merges slot `b` into slot `a` (`a < b`): posterior `(pa a[x] + pb b[x + u]) / (pa + pb)`.
    pub fn merge(&mut self, a: u32, b: u32, u: usize) {
        debug_assert!(a < b);
        let q = self.q;
        let (ai, bi) = (a as usize, b as usize);
        let (pa, pb) = (self.py[ai], self.py[bi]);
        let t = pa + pb;
        let (head, tail) = self.post.split_at_mut(bi * q);
        let ra = &mut head[ai * q..(ai + 1) * q];
        let rb = &tail[..q];
        let mut s = 0.0;
        for x in 0..q {
            let v = (pa * ra[x] + pb * rb[self.group.apply(q, x, u)]) / t;
            ra[x] = v;
            s += v;
        }
        if s > 0.0 && s != 1.0 {
            ra.iter_mut().for_each(|v| *v /= s);
        }
        self.h[ai] = neg_entropy_nats(ra);
        if self.aligned {
            self.cshift[ai] = self.canonical(a) as u16;
        }
        self.py[ai] = t;
        self.alive[bi] = false;
        self.stamp[ai] = self.stamp[ai].wrapping_add(1);
        self.parent[bi] = a;
        self.live -= 1;
    }

    /// Greedy merging down to `mu` live symbols.
    pub fn greedy(&mut self, mu: usize) {
        self.greedy_with_limit(mu, exact_limit(mu));
    }

    pub(crate) fn greedy_with_limit(&mut self, mu: usize, exact_limit: usize) {
        while self.live > mu {
            if self.live <= exact_limit {
                self.greedy_complete(mu);
            } else {
                // rebuild the candidate graph whenever the alphabet halves, so
                // neighbour lists follow the merged rows
                self.greedy_sparse(mu.max(exact_limit).max(self.live / 4));
            }
        }
    }

    fn live_slots(&self) -> Vec<u32> {
        (0..self.alive.len() as u32).filter(|&i| self.alive[i as usize]).collect()
    }

    fn greedy_complete(&mut self, mu: usize) {
        let slots = self.live_slots();
        let mut heap = BinaryHeap::with_capacity(slots.len() * slots.len() / 2);
        for (i, &a) in slots.iter().enumerate() {
            for &b in &slots[i + 1..] {
                heap.push(self.cand(a, b));
            }
        }
        while self.live > mu {
            let Some(c) = heap.pop() else { break };
            if !self.valid(&c) {
                continue;
            }
            self.merge(c.a, c.b, c.u as usize);
            for i in 0..self.alive.len() as u32 {
                if i != c.a && self.alive[i as usize] {
                    heap.push(self.cand(c.a, i));
                }
            }
        }
    }

    /// Embedding used for neighbour search: square roots of the canonically
    /// shifted posterior, so Euclidean distance tracks the Hellinger distance.
    fn embedding(&self, slots: &[u32]) -> Vec<f64> {
        let q = self.q;
        let mut pts = Vec::with_capacity(slots.len() * q);
        for &s in slots {
            let shift = self.cshift[s as usize] as usize;
            let row = self.row(s);
            for x in 0..q {
                pts.push(row[self.group.apply(q, x, shift)].sqrt());
            }
        }
        pts
    }

    /// Merges rows whose aligned posteriors agree to `DEFAULT_TOL` into the
    /// smallest slot. These merges cost nothing, so greedy would take them
    /// first anyway, and clusters of coincident points would stall the kd-tree.
    fn merge_duplicates(&mut self, target: usize) {
        let q = self.q;
        let mut reps: HashMap<Vec<i64>, u32> = HashMap::new();
        let mut key = Vec::with_capacity(q);
        let mut aligned = vec![0.0; q];
        for s in 0..self.alive.len() as u32 {
            if self.live <= target {
                return;
            }
            if !self.alive[s as usize] {
                continue;
            }
            let shift = self.cshift[s as usize] as usize;
            for (x, v) in aligned.iter_mut().enumerate() {
                *v = self.row(s)[self.group.apply(q, x, shift)];
            }
            quantize_row(&aligned, DEFAULT_TOL, &mut key);
            match reps.get(&key) {
                Some(&r) => {
                    let u = self.group.relative(q, shift, self.cshift[r as usize] as usize);
                    self.merge(r, s, u);
                }
                None => {
                    reps.insert(key.clone(), s);
                }
            }
        }
    }

    fn canonical(&self, s: u32) -> usize {
        if self.group == ShiftGroup::Trivial {
            return 0;
        }
        let mut key = Vec::with_capacity(self.q);
        quantize_row(self.row(s), DEFAULT_TOL, &mut key);
        canonical_shift(&key, self.group)
    }

    fn greedy_sparse(&mut self, target: usize) {
        self.cshift = vec![0; self.alive.len()];
        for s in 0..self.alive.len() as u32 {
            if self.alive[s as usize] {
                self.cshift[s as usize] = self.canonical(s) as u16;
            }
        }
        self.aligned = true;
        self.merge_duplicates(target);
        if self.live <= target {
            self.aligned = false;
            return;
        }
        let slots = self.live_slots();
        let pts = self.embedding(&slots);
        let tree = KdTree::new(&pts, self.q);
        let mut lists: Vec<Vec<Edge>> = vec![Vec::new(); self.alive.len()];
        let mut found = Vec::with_capacity(KNN);
        for (i, &s) in slots.iter().enumerate() {
            tree.nearest(i as u32, KNN, &mut found);
            for &(_, j) in &found {
                let t = slots[j as usize];
                lists[s as usize].push(Edge::stale(t));
                lists[t as usize].push(Edge::stale(s));
            }
        }
        drop(tree);
        drop(pts);
        let mut heap = BinaryHeap::with_capacity(slots.len());
        for &s in &slots {
            if let Some(c) = self.refresh(s, &mut lists[s as usize]) {
                heap.push(c);
            }
        }
        while self.live > target {
            let Some(c) = heap.pop() else { break };
            if self.valid(&c) {
                self.merge(c.a, c.b, c.u as usize);
                let mut union = std::mem::take(&mut lists[c.b as usize]);
                union.append(&mut lists[c.a as usize]);
                union.iter_mut().for_each(|e| e.stamp = u32::MAX);
                if let Some(n) = self.refresh(c.a, &mut union) {
                    heap.push(n);
                }
                lists[c.a as usize] = union;
                continue;
            }
            let (o, so) = if c.owner == c.a { (c.a, c.sa) } else { (c.b, c.sb) };
            if self.alive[o as usize] && self.stamp[o as usize] == so {
                let mut list = std::mem::take(&mut lists[o as usize]);
                if let Some(n) = self.refresh(o, &mut list) {
                    heap.push(n);
                }
                lists[o as usize] = list;
            }
        }
        self.aligned = false;
    }

    /// Resolves merged neighbours, re-scores changed edges, keeps the
    /// `LIST_CAP` cheapest, and returns the best edge of `s`.
    fn refresh(&mut self, s: u32, list: &mut Vec<Edge>) -> Option<Cand> {
        for e in list.iter_mut() {
            let r = self.find(e.n);
            if r != e.n {
                e.n = r;
                e.stamp = u32::MAX;
            }
        }
        list.retain(|e| e.n != s);
        list.sort_unstable_by(|x, y| x.n.cmp(&y.n).then(x.stamp.cmp(&y.stamp)));
        list.dedup_by_key(|e| e.n);
        for e in list.iter_mut() {
            if e.stamp != self.stamp[e.n as usize] {
                let (a, b) = if s < e.n { (s, e.n) } else { (e.n, s) };
                let (cost, u) = self.best_edge(a, b);
                *e = Edge {
                    n: e.n,
                    stamp: self.stamp[e.n as usize],
                    cost,
                    u,
                };
            }
        }
        let key = |e: &Edge| (e.cost, s.min(e.n), s.max(e.n));
        if list.len() > LIST_CAP {
            list.select_nth_unstable_by(LIST_CAP - 1, |x, y| key(x).partial_cmp(&key(y)).unwrap());
            list.truncate(LIST_CAP);
        }
        let best = list.iter().min_by(|x, y| key(x).partial_cmp(&key(y)).unwrap())?;
        let (a, b) = if s < best.n { (s, best.n) } else { (best.n, s) };
        Some(Cand {
            cost: best.cost,
            a,
            b,
            u: best.u,
            sa: self.stamp[a as usize],
            sb: self.stamp[b as usize],
            owner: s,
        })
    }

    /// Threshold merging: sweep `k` in slot order and merge it with the first
    /// later slot `j` such that both masses are at most `c1 / M'` and the
    /// posteriors are within `l1_max` in l1 distance. Returns after a sweep
    /// that merges nothing or once `mu` is reached.
    pub fn threshold(&mut self, mu: usize, c1: f64, l1_max: f64) {
        let n = self.alive.len() as u32;
        loop {
            let mut merged_any = false;
            for k in 0..n {
                if self.live <= mu {
                    return;
                }
                if !self.alive[k as usize] || self.py[k as usize] > c1 / self.live as f64 {
                    continue;
                }
                for j in k + 1..n {
                    if !self.alive[j as usize] || self.py[j as usize] > c1 / self.live as f64 {
                        continue;
                    }
                    let l1: f64 = self
                        .row(k)
                        .iter()
                        .zip(self.row(j))
                        .map(|(a, b)| (a - b).abs())
                        .sum();
                    if l1 <= l1_max {
                        self.merge(k, j, 0);
                        merged_any = true;
                        break;
                    }
                }
            }
            if !merged_any {
                return;
            }
        }
    }

    pub fn finish(self) -> JointDist {
        let q = self.q;
        let mut py = Vec::with_capacity(self.live);
        let mut post = Vec::with_capacity(self.live * q);
        for (i, &alive) in self.alive.iter().enumerate() {
            if alive {
                py.push(self.py[i]);
                post.extend_from_slice(&self.post[i * q..(i + 1) * q]);
            }
        }
        JointDist::from_parts(q, py, post)
    }
}

