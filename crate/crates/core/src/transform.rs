//! One step of channel evolution, computed directly on posteriors.
//!
//! For a butterfly `x1 = encode_first(u1, u2)`, `x2 = u2`, and two independent
//! uses of the channel with outputs `y_i`, `y_j`:
//!
//! * `-` channel, output `(i, j)` at index `i * M + j`:
//!   `P(u1 | i, j) = sum_{u2} P(encode_first(u1, u2) | i) P(u2 | j)`;
//! * `+` channel, output `(u1, i, j)` at index `u1 * M^2 + i * M + j`:
//!   `P(u2 | u1, i, j)` proportional to `P(encode_first(u1, u2) | i) P(u2 | j)`.
//!
//! Outputs with mass below [`PROB_FLOOR`](crate::channel::PROB_FLOOR) are
//! dropped from the result.

use crate::alphabet::KernelSpec;
use crate::channel::{JointDist, PlusLabels};
use crate::error::{Error, Result};

fn check(d: &JointDist, k: &KernelSpec) -> Result<()> {
    if d.q() != k.q() {
        return Err(Error::domain(format!(
            "channel has q = {} but kernel has q = {}",
            d.q(),
            k.q()
        )));
    }
    Ok(())
}

/// The `-` (check-node) evolution of `d`.
pub fn minus_transform(d: &JointDist, k: &KernelSpec) -> Result<JointDist> {
    check(d, k)?;
    let q = d.q();
    let m = d.out_size();
    let mut py = Vec::with_capacity(m * m);
    let mut post = vec![0.0; m * m * q];
    for i in 0..m {
        let a = d.posterior(i);
        let pi = d.py()[i];
        for j in 0..m {
            let b = d.posterior(j);
            let row = &mut post[(i * m + j) * q..(i * m + j + 1) * q];
            for (u1, out) in row.iter_mut().enumerate() {
                let enc = k.encode_row(u1);
                let mut s = 0.0;
                for u2 in 0..q {
                    s += a[enc[u2] as usize] * b[u2];
                }
                *out = s;
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            }
            py.push(pi * d.py()[j]);
        }
    }
    Ok(JointDist::from_parts(q, py, post).prune_zero())
}

/// The `+` (variable-node) evolution of `d`.
pub fn plus_transform(d: &JointDist, k: &KernelSpec) -> Result<JointDist> {
    check(d, k)?;
    let q = d.q();
    let m = d.out_size();
    let size = q * m * m;
    let mut py = Vec::with_capacity(size);
    let mut post = vec![0.0; size * q];
    let mut ids = Vec::with_capacity(size);
    for u1 in 0..q {
        let enc = k.encode_row(u1);
        for i in 0..m {
            let a = d.posterior(i);
            let pi = d.py()[i];
            for j in 0..m {
                let b = d.posterior(j);
                let label = u1 * m * m + i * m + j;
                let row = &mut post[label * q..(label + 1) * q];
                let mut s = 0.0;
                for (u2, out) in row.iter_mut().enumerate() {
                    let v = a[enc[u2] as usize] * b[u2];
                    *out = v;
                    s += v;
                }
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v /= s);
                }
                py.push(pi * d.py()[j] * s);
                ids.push(label as u64);
            }
        }
    }
    let mut out = JointDist::from_parts(q, py, post);
    out.plus = Some(PlusLabels {
        inner: m,
        modular: k.is_mod_add(),
        ids,
    });
    Ok(out.prune_zero())
}
