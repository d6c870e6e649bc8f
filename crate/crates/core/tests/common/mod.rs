//! Reference computations and fixtures shared by the integration tests and
//! the acceptance harness. The enumeration oracles use nothing from the crate
//! except the encoder passed in by the caller.

#![allow(dead_code)]

use std::collections::HashMap;

use qpolar::alphabet::{KernelSpec, Symbol};
use qpolar::channel::JointDist;
use qpolar::merge::{reduce_no_loss_in, DEFAULT_TOL};
use qpolar::transform::{minus_transform, plus_transform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random transition rows `W(.|x)` with strictly positive entries.
pub fn random_rows<R: Rng>(rng: &mut R, q: usize, m: usize) -> Vec<Vec<f64>> {
    (0..q)
        .map(|_| {
            let r: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

fn entropy_bits(p: &[f64]) -> f64 {
    let s: f64 = p.iter().sum();
    if s <= 0.0 {
        return 0.0;
    }
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let v = v / s;
            -v * v.log2()
        })
        .sum()
}

/// Symmetric capacity of rows `W(.|x)` in bits, summed directly over `(x, y)`.
pub fn capacity_of_rows(rows: &[Vec<f64>]) -> f64 {
    let q = rows.len();
    let m = rows[0].len();
    let mut h = 0.0;
    for y in 0..m {
        let col: Vec<f64> = rows.iter().map(|r| r[y] / q as f64).collect();
        h += col.iter().sum::<f64>() * entropy_bits(&col);
    }
    (q as f64).log2() - h
}

/// Every vector in `{0..q}^len`, first coordinate varying slowest.
pub fn all_vectors(q: usize, len: usize) -> Vec<Vec<Symbol>> {
    let total = q.pow(len as u32);
    (0..total)
        .map(|mut c| {
            let mut v = vec![0; len];
            for s in v.iter_mut().rev() {
                *s = c % q;
                c /= q;
            }
            v
        })
        .collect()
}

/// Capacity in bits of the `i`-th synthetic channel `u_i -> (y, u_0..u_{i-1})`
/// for the code `x = enc(u)` on `N` uses of `rows`, by full enumeration of
/// `P(u, y) = q^-N prod_j W(y_j | x_j)`.
pub fn brute_force_capacities(rows: &[Vec<f64>], big_n: usize, enc: impl Fn(&[Symbol]) -> Vec<Symbol>) -> Vec<f64> {
    let q = rows.len();
    let m = rows[0].len();
    let inputs = all_vectors(q, big_n);
    let outputs = all_vectors(m, big_n);
    let scale = (q as f64).powi(big_n as i32).recip();
    let codewords: Vec<Vec<Symbol>> = inputs.iter().map(|u| enc(u)).collect();
    (0..big_n)
        .map(|i| {
            let mut groups: HashMap<(usize, Vec<Symbol>), Vec<f64>> = HashMap::new();
            for (yi, y) in outputs.iter().enumerate() {
                for (u, x) in inputs.iter().zip(&codewords) {
                    let p: f64 = scale * x.iter().zip(y).map(|(&xj, &yj)| rows[xj][yj]).product::<f64>();
                    groups.entry((yi, u[..i].to_vec())).or_insert_with(|| vec![0.0; q])[u[i]] += p;
                }
            }
            let h: f64 = groups.values().map(|v| v.iter().sum::<f64>() * entropy_bits(v)).sum();
            (q as f64).log2() - h
        })
        .collect()
}

fn bit_reverse(i: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, b| (acc << 1) | ((i >> b) & 1))
}

/// Generator matrix `B_N F^{(x)n}` with `F = [[1, 0], [1, 1]]`.
pub fn generator(n: usize) -> Vec<Vec<usize>> {
    let big_n = 1 << n;
    let mut f = vec![vec![1usize]];
    for _ in 0..n {
        let s = f.len();
        let mut g = vec![vec![0; 2 * s]; 2 * s];
        for r in 0..s {
            for c in 0..s {
                g[r][c] = f[r][c];
                g[s + r][c] = f[r][c];
                g[s + r][s + c] = f[r][c];
            }
        }
        f = g;
    }
    (0..big_n).map(|i| f[bit_reverse(i, n)].clone()).collect()
}

/// `x = u G (mod q)`.
pub fn matrix_encode(u: &[Symbol], g: &[Vec<usize>], q: usize) -> Vec<Symbol> {
    let big_n = u.len();
    (0..big_n)
        .map(|j| (0..big_n).map(|i| u[i] * g[i][j]).sum::<usize>() % q)
        .collect()
}

fn evolve_raw(d: &JointDist, k: &KernelSpec, path: &[bool]) -> JointDist {
    path.iter().fold(d.clone(), |t, &plus| {
        if plus { plus_transform(&t, k) } else { minus_transform(&t, k) }.unwrap()
    })
}

/// Evolves along `path` with a no-loss reduction after every step.
fn evolve_reduced(d: &JointDist, k: &KernelSpec, path: &[bool]) -> JointDist {
    let group = k.shift_group();
    path.iter().fold(reduce_no_loss_in(d, group, DEFAULT_TOL), |t, &plus| {
        let raw = if plus { plus_transform(&t, k) } else { minus_transform(&t, k) }.unwrap();
        reduce_no_loss_in(&raw, group, DEFAULT_TOL)
    })
}

/// `P` with `m` random rows and a random (non-uniform) input marginal; `Q`
/// moves every row by a random group shift and shuffles the labels. Both are
/// evolved along all eight paths in `{-,+}^3`, without merging and with a
/// no-loss reduction after every step. Returns the largest difference in
/// `H(X|Y)` among the three evolutions of each path.
pub fn equivalence_gap(k: &KernelSpec, m: usize, seed: u64) -> f64 {
    let q = k.q();
    let group = k.shift_group();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = random_rows(&mut rng, m, q);
    let py: Vec<f64> = {
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let mut moved: Vec<(f64, Vec<f64>)> = rows
        .iter()
        .zip(&py)
        .map(|(r, &p)| {
            let s = rng.gen_range(0..group.size(q));
            (p, (0..q).map(|x| r[group.apply(q, x, s)]).collect())
        })
        .collect();
    moved.shuffle(&mut rng);
    let p = JointDist::with_any_marginal(q, py, rows.concat()).unwrap();
    let qd = JointDist::with_any_marginal(
        q,
        moved.iter().map(|r| r.0).collect(),
        moved.iter().flat_map(|r| r.1.clone()).collect(),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for code in 0..8u32 {
        let path: Vec<bool> = (0..3).map(|b| (code >> b) & 1 == 1).collect();
        let hp = evolve_raw(&p, k, &path).conditional_entropy();
        worst = worst.max((hp - evolve_raw(&qd, k, &path).conditional_entropy()).abs());
        for d in [&p, &qd] {
            worst = worst.max((hp - evolve_reduced(d, k, &path).conditional_entropy()).abs());
        }
    }
    worst
}

