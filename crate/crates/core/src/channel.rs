//! Joint input/output distributions and the channel families used for construction.
//!
//! A channel `W(y|x)` under the uniform input prior is stored as the output
//! marginal `P_Y(y)` together with the posterior rows `P_{X|Y}(.|y)`. The
//! transition probabilities are recovered as `W(y|x) = q P_Y(y) P_{X|Y}(x|y)`.

use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Default floor below which output symbols are dropped.
pub const PROB_FLOOR: f64 = 1e-15;

const SUM_TOL: f64 = 1e-12;
const MARGINAL_TOL: f64 = 1e-10;

/// Bookkeeping attached to the output of a `+` transform: for every retained
/// output symbol, its label `u * M^2 + i * M + j` in the unpruned product alphabet.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct PlusLabels {
    pub inner: usize,
    pub modular: bool,
    pub ids: Vec<u64>,
}

/// A finite joint distribution on `X x Y` with uniform input marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDist {
    q: usize,
    py: Vec<f64>,
    post: Vec<f64>,
    pub(crate) plus: Option<PlusLabels>,
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
#[inline]
pub fn entropy_bits(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.log2();
        }
    }
    h
}

impl JointDist {
    /// Builds a distribution from an output marginal and row-major `M x q`
    /// posterior matrix, checking every invariant. Zero-mass outputs are dropped.
    pub fn new(q: usize, py: Vec<f64>, post: Vec<f64>) -> Result<Self> {
        if q < 2 {
            return Err(Error::domain("input alphabet size must be >= 2"));
        }
        if post.len() != py.len() * q {
            return Err(Error::domain(format!(
                "posterior matrix has {} entries, expected {} x {q}",
                post.len(),
                py.len()
            )));
        }
        let d = Self::from_parts(q, py, post).prune_zero();
        d.validate()?;
        Ok(d)
    }

    /// Like [`new`](Self::new) but accepts any input marginal. The transforms
    /// and merges are defined for such joint distributions too.
    pub fn with_any_marginal(q: usize, py: Vec<f64>, post: Vec<f64>) -> Result<Self> {
        if q < 2 || post.len() != py.len() * q {
            return Err(Error::domain(format!(
                "posterior matrix has {} entries, expected {} x {q}",
                post.len(),
                py.len()
            )));
        }
        let d = Self::from_parts(q, py, post).prune_zero();
        d.input_marginal()?;
        Ok(d)
    }

    pub(crate) fn from_parts(q: usize, py: Vec<f64>, post: Vec<f64>) -> Self {
        debug_assert_eq!(post.len(), py.len() * q);
        JointDist {
            q,
            py,
            post,
            plus: None,
        }
    }

    /// Builds the joint distribution of a channel given as rows `W(.|x)`, one per input.
    pub fn from_transition_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.len();
        if q < 2 {
            return Err(Error::domain("a channel needs at least two inputs"));
        }
        let m = rows[0].len();
        for (x, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::domain(format!("row {x} has {} entries, expected {m}", r.len())));
            }
            if r.iter().any(|&v| !(0.0..=1.0).contains(&v) || v.is_nan()) {
                return Err(Error::domain(format!("row {x} has an entry outside [0, 1]")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("row {x} sums to {s}, not 1")));
            }
        }
        let mut py = Vec::with_capacity(m);
        let mut post = Vec::with_capacity(m * q);
        for y in 0..m {
            let col: f64 = rows.iter().map(|r| r[y]).sum();
            py.push(col / q as f64);
            for r in rows {
                post.push(if col > 0.0 { r[y] / col } else { 0.0 });
            }
        }
        let d = Self::from_parts(q, py, post).prune_zero();
        d.validate()?;
        Ok(d)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of output symbols `M`.
    pub fn out_size(&self) -> usize {
        self.py.len()
    }

    pub fn py(&self) -> &[f64] {
        &self.py
    }

    /// Posterior row `P_{X|Y}(.|y)`.
    pub fn posterior(&self, y: usize) -> &[f64] {
        &self.post[y * self.q..(y + 1) * self.q]
    }

    pub fn posteriors(&self) -> &[f64] {
        &self.post
    }

    /// Transition probability `W(y|x)`.
    pub fn transition(&self, y: usize, x: usize) -> f64 {
        self.q as f64 * self.py[y] * self.post[y * self.q + x]
    }

    pub(crate) fn into_parts(self) -> (usize, Vec<f64>, Vec<f64>) {
        (self.q, self.py, self.post)
    }

    /// Checks the row-sum, nonnegativity and uniform-marginal invariants.
    pub fn validate(&self) -> Result<()> {
        let q = self.q;
        let marginal = self.input_marginal()?;
        for (x, &m) in marginal.iter().enumerate() {
            if (m - 1.0 / q as f64).abs() > MARGINAL_TOL {
                return Err(Error::domain(format!(
                    "input marginal P(x = {x}) = {m}, expected 1/{q}"
                )));
            }
        }
        Ok(())
    }

    /// Input marginal `P(x)`, after checking every invariant except its uniformity.
    pub fn input_marginal(&self) -> Result<Vec<f64>> {
        let total: f64 = self.py.iter().sum();
        if (total - 1.0).abs() > SUM_TOL * (1.0 + self.py.len() as f64).sqrt() {
            return Err(Error::domain(format!("output marginal sums to {total}")));
        }
        let mut marginal = vec![0.0; self.q];
        for (y, &p) in self.py.iter().enumerate() {
            if !(p > 0.0) {
                return Err(Error::domain(format!("output {y} has mass {p}")));
            }
            let row = self.posterior(y);
            if row.iter().any(|&v| v < 0.0 || v.is_nan()) {
                return Err(Error::domain(format!("posterior row {y} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::domain(format!("posterior row {y} sums to {s}")));
            }
            for (m, &v) in marginal.iter_mut().zip(row) {
                *m += p * v;
            }
        }
        Ok(marginal)
    }

    /// `H(X|Y)` in bits.
    pub fn conditional_entropy(&self) -> f64 {
        self.py
            .iter()
            .enumerate()
            .map(|(y, &p)| p * entropy_bits(self.posterior(y)))
            .sum()
    }

    /// Symmetric capacity `I(W) = log2 q - H(X|Y)` in bits.
    pub fn symmetric_capacity(&self) -> f64 {
        (self.q as f64).log2() - self.conditional_entropy()
    }

    /// Bhattacharyya parameter `Z(W) = sum_y sqrt(W(y|0) W(y|1))`; binary inputs only.
    pub fn bhattacharyya_binary(&self) -> Result<f64> {
        if self.q != 2 {
            return Err(Error::Unsupported(format!(
                "Bhattacharyya parameter is defined for q = 2, got q = {}",
                self.q
            )));
        }
        Ok(self
            .py
            .iter()
            .enumerate()
            .map(|(y, &p)| 2.0 * p * (self.post[2 * y] * self.post[2 * y + 1]).sqrt())
            .sum())
    }

    /// Drops outputs with mass below `floor` and renormalizes the marginal.
    pub fn prune_and_normalize(&self, floor: f64) -> Result<JointDist> {
        let keep: Vec<usize> = (0..self.out_size()).filter(|&y| self.py[y] >= floor && self.py[y] > 0.0).collect();
        if keep.is_empty() {
            return Err(Error::Degenerate(format!(
                "all {} output symbols fall below the floor {floor}",
                self.out_size()
            )));
        }
        if keep.len() == self.out_size() {
            return Ok(self.clone());
        }
        Ok(self.select(&keep, true))
    }

    /// Pruning used between construction steps: `floor = PROB_FLOOR`, labels kept.
    pub(crate) fn prune_zero(self) -> JointDist {
        if self.py.iter().all(|&p| p >= PROB_FLOOR) {
            return self;
        }
        let keep: Vec<usize> = (0..self.out_size()).filter(|&y| self.py[y] >= PROB_FLOOR).collect();
        if keep.is_empty() {
            return self;
        }
        self.select(&keep, true)
    }

    fn select(&self, keep: &[usize], renormalize: bool) -> JointDist {
        let q = self.q;
        let mut py: Vec<f64> = keep.iter().map(|&y| self.py[y]).collect();
        if renormalize {
            let s: f64 = py.iter().sum();
            py.iter_mut().for_each(|p| *p /= s);
        }
        let mut post = Vec::with_capacity(keep.len() * q);
        for &y in keep {
            post.extend_from_slice(self.posterior(y));
        }
        let plus = self.plus.as_ref().map(|l| PlusLabels {
            inner: l.inner,
            modular: l.modular,
            ids: keep.iter().map(|&y| l.ids[y]).collect(),
        });
        JointDist { q, py, post, plus }
    }
}

/// The channel families that can be built directly.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelFamily {
    /// q-ary symmetric channel: correct with probability `1 - eps`, otherwise uniform over the rest.
    Qsc { q: usize, eps: f64 },
    /// q-ary erasure channel.
    Qec { q: usize, eps: f64 },
    /// Ordered erasure channel on `q = 2^r` inputs: `eps[k]` is the probability that
    /// the `k` most significant bits are erased.
    Oec { eps: Vec<f64> },
    /// 16-QAM over AWGN, quantized to `grid_points` cells per real dimension.
    QamAwgn { snr_db: f64, grid_points: usize },
    /// Explicit transition table, one row `W(.|x)` per input.
    Matrix { rows: Vec<Vec<f64>> },
    /// Binary symmetric channel (alias of `Qsc` with `q = 2`).
    Bsc { eps: f64 },
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::domain(format!("{name} = {v} is not a probability")));
    }
    Ok(())
}

impl ChannelFamily {
    /// Input alphabet size of the channel this family describes.
    pub fn q(&self) -> usize {
        match self {
            ChannelFamily::Qsc { q, .. } | ChannelFamily::Qec { q, .. } => *q,
            ChannelFamily::Oec { eps } => 1 << eps.len().saturating_sub(1),
            ChannelFamily::QamAwgn { .. } => 16,
            ChannelFamily::Matrix { rows } => rows.len(),
            ChannelFamily::Bsc { .. } => 2,
        }
    }

    /// Transition rows `W(.|x)`.
    pub fn transition_rows(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            ChannelFamily::Bsc { eps } => ChannelFamily::Qsc { q: 2, eps: *eps }.transition_rows(),
            ChannelFamily::Qsc { q, eps } => {
                let q = *q;
                check_prob("eps", *eps)?;
                if q < 2 {
                    return Err(Error::domain("qSC needs q >= 2"));
                }
                let off = eps / (q - 1) as f64;
                Ok((0..q)
                    .map(|x| (0..q).map(|y| if x == y { 1.0 - eps } else { off }).collect())
                    .collect())
            }
            ChannelFamily::Qec { q, eps } => {
                let q = *q;
                check_prob("eps", *eps)?;
                if q < 2 {
                    return Err(Error::domain("qEC needs q >= 2"));
                }
                Ok((0..q)
                    .map(|x| {
                        let mut r = vec![0.0; q + 1];
                        r[x] = 1.0 - eps;
                        r[q] = *eps;
                        r
                    })
                    .collect())
            }
            ChannelFamily::Oec { eps } => oec_rows(eps),
            ChannelFamily::QamAwgn { snr_db, grid_points } => qam_rows(*snr_db, *grid_points),
            ChannelFamily::Matrix { rows } => Ok(rows.clone()),
        }
    }

    /// Builds the joint distribution under the uniform input prior.
    pub fn build(&self) -> Result<JointDist> {
        JointDist::from_transition_rows(&self.transition_rows()?)
    }
}

fn oec_rows(eps: &[f64]) -> Result<Vec<Vec<f64>>> {
    if eps.len() < 2 {
        return Err(Error::domain("OEC needs r + 1 >= 2 erasure probabilities"));
    }
    let r = eps.len() - 1;
    if r > 16 {
        return Err(Error::domain("OEC supports at most 16 bits"));
    }
    for &e in eps {
        check_prob("oec eps", e)?;
    }
    let s: f64 = eps.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("OEC erasure probabilities sum to {s}, not 1")));
    }
    let q = 1usize << r;
    // Output block k lists the 2^(r-k) values of the r-k unerased low bits.
    let offsets: Vec<usize> = (0..=r).scan(0, |acc, k| {
        let o = *acc;
        *acc += 1 << (r - k);
        Some(o)
    }).collect();
    let m = offsets[r] + 1;
    Ok((0..q)
        .map(|x| {
            let mut row = vec![0.0; m];
            for (k, &e) in eps.iter().enumerate() {
                let low = x & ((1usize << (r - k)) - 1);
                row[offsets[k] + low] += e;
            }
            row
        })
        .collect())
}

/// 16-QAM on `{+-1, +-3}^2` at unit average energy; symbol `x` maps to
/// in-phase level `x % 4` and quadrature level `x / 4`.
fn qam_rows(snr_db: f64, grid_points: usize) -> Result<Vec<Vec<f64>>> {
    if grid_points < 2 {
        return Err(Error::domain("grid_points must be >= 2"));
    }
    if !snr_db.is_finite() {
        return Err(Error::domain("snr_db must be finite"));
    }
    let scale = 1.0 / 10f64.sqrt();
    let levels: Vec<f64> = [-3.0, -1.0, 1.0, 3.0].iter().map(|v| v * scale).collect();
    let snr = 10f64.powf(snr_db / 10.0);
    let sigma = (1.0 / (2.0 * snr)).sqrt();
    let lo = levels[0] - 4.0 * sigma;
    let hi = levels[3] + 4.0 * sigma;
    let width = (hi - lo) / grid_points as f64;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    // Outermost cells extend to infinity.
    let cell_prob = |s: f64, c: usize| -> f64 {
        let a = if c == 0 { f64::NEG_INFINITY } else { lo + c as f64 * width };
        let b = if c + 1 == grid_points { f64::INFINITY } else { lo + (c + 1) as f64 * width };
        let fa = if a.is_finite() { normal.cdf((a - s) / sigma) } else { 0.0 };
        let fb = if b.is_finite() { normal.cdf((b - s) / sigma) } else { 1.0 };
        (fb - fa).max(0.0)
    };
    let per_dim: Vec<Vec<f64>> = levels
        .iter()
        .map(|&s| {
            let v: Vec<f64> = (0..grid_points).map(|c| cell_prob(s, c)).collect();
            let t: f64 = v.iter().sum();
            v.into_iter().map(|p| p / t).collect()
        })
        .collect();
    Ok((0..16)
        .map(|x| {
            let (i, j) = (x % 4, x / 4);
            let mut row = Vec::with_capacity(grid_points * grid_points);
            for a in 0..grid_points {
                for b in 0..grid_points {
                    row.push(per_dim[i][a] * per_dim[j][b]);
                }
            }
            row
        })
        .collect())
}

/// Reads a transition table: header `q M`, then `q` rows of `M` entries `W(y|x)`.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut tokens = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        let mut col = 0;
        for tok in body.split_whitespace() {
            let start = body[col..].find(tok).map(|i| i + col).unwrap_or(col);
            col = start + tok.len();
            tokens.push((ln + 1, start + 1, tok));
        }
    }
    let mut it = tokens.into_iter();
    let mut next_num = |what: &str| -> Result<(usize, usize, f64)> {
        let (line, column, tok) = it.next().ok_or_else(|| Error::Parse {
            line: 0,
            column: 0,
            message: format!("unexpected end of input, expected {what}"),
        })?;
        tok.parse::<f64>()
            .map(|v| (line, column, v))
            .map_err(|_| Error::Parse {
                line,
                column,
                message: format!("expected {what}, found `{tok}`"),
            })
    };
    let (l, c, q) = next_num("q")?;
    let (_, _, m) = next_num("M")?;
    if q < 2.0 || q.fract() != 0.0 || m < 1.0 || m.fract() != 0.0 {
        return Err(Error::Parse {
            line: l,
            column: c,
            message: "header must be `q M` with integers q >= 2, M >= 1".into(),
        });
    }
    let (q, m) = (q as usize, m as usize);
    let mut rows = Vec::with_capacity(q);
    for _ in 0..q {
        let mut row = Vec::with_capacity(m);
        for _ in 0..m {
            row.push(next_num("a transition probability")?.2);
        }
        rows.push(row);
    }
    if let Some((line, column, tok)) = it.next() {
        return Err(Error::Parse {
            line,
            column,
            message: format!("trailing token `{tok}` after {q} x {m} table"),
        });
    }
    Ok(rows)
}

pub fn read_matrix_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}
