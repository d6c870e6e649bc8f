//! Input-alphabet arithmetic and the two-input polarizing kernels.
//!
//! Symbols are dense integers `0..q`. A kernel maps the pair `(u1, u2)` of a
//! butterfly to `(x1, x2) = (encode_first(u1, u2), u2)`; the transforms, the
//! encoder and the decoder all go through [`KernelSpec::encode_first`].
//!
//! Finite fields of characteristic 2 use the following primitive polynomials,
//! with field elements written as integers whose bit `k` is the coefficient of
//! `x^k`:
//!
//! | r | q   | polynomial                  |
//! |---|-----|-----------------------------|
//! | 1 | 2   | x + 1                       |
//! | 2 | 4   | x^2 + x + 1                 |
//! | 3 | 8   | x^3 + x + 1                 |
//! | 4 | 16  | x^4 + x + 1                 |
//! | 5 | 32  | x^5 + x^2 + 1               |
//! | 6 | 64  | x^6 + x + 1                 |
//! | 7 | 128 | x^7 + x + 1                 |
//! | 8 | 256 | x^8 + x^4 + x^3 + x^2 + 1   |
//!
//! Prime fields use arithmetic modulo `q`. The default primitive element is the
//! smallest integer of multiplicative order `q - 1` (the element `x`, i.e. `2`,
//! for every binary extension field with `r >= 2`).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// An input symbol in `0..q`.
pub type Symbol = usize;

const BINARY_POLYS: [u32; 9] = [
    0,
    0b11,
    0b111,
    0b1011,
    0b1_0011,
    0b10_0101,
    0b100_0011,
    0b1000_0011,
    0b1_0001_1101,
];

pub(crate) fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// A finite field `F_q` for `q` prime or `q = 2^r`, `r <= 8`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Prime { p: usize },
    Binary { r: u32, poly: u32 },
}

impl Field {
    pub fn new(q: usize) -> Result<Self> {
        if is_prime(q) {
            return Ok(Field::Prime { p: q });
        }
        if q.is_power_of_two() && q >= 2 {
            let r = q.trailing_zeros();
            if r <= 8 {
                return Ok(Field::Binary {
                    r,
                    poly: BINARY_POLYS[r as usize],
                });
            }
        }
        Err(Error::domain(format!(
            "no field representation for q = {q} (supported: primes and 2^r with r <= 8)"
        )))
    }

    pub fn order(&self) -> usize {
        match *self {
            Field::Prime { p } => p,
            Field::Binary { r, .. } => 1 << r,
        }
    }

    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        match *self {
            Field::Prime { p } => (a + b) % p,
            Field::Binary { .. } => a ^ b,
        }
    }

    pub fn neg(&self, a: Symbol) -> Symbol {
        match *self {
            Field::Prime { p } => (p - a) % p,
            Field::Binary { .. } => a,
        }
    }

    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        match *self {
            Field::Prime { p } => (a * b) % p,
            Field::Binary { r, poly } => {
                let (mut a, mut b) = (a as u32, b as u32);
                let mut acc = 0u32;
                while b != 0 {
                    if b & 1 == 1 {
                        acc ^= a;
                    }
                    b >>= 1;
                    a <<= 1;
                    if a & (1 << r) != 0 {
                        a ^= poly;
                    }
                }
                acc as Symbol
            }
        }
    }

    /// Multiplicative order of a nonzero element; `0` for the zero element.
    pub fn multiplicative_order(&self, a: Symbol) -> usize {
        if a == 0 || a >= self.order() {
            return 0;
        }
        let mut x = a;
        let mut k = 1;
        while x != 1 {
            x = self.mul(x, a);
            k += 1;
        }
        k
    }

    pub fn is_primitive(&self, a: Symbol) -> bool {
        self.multiplicative_order(a) == self.order() - 1
    }

    /// Smallest element of multiplicative order `q - 1`.
    pub fn primitive_element(&self) -> Symbol {
        (1..self.order())
            .find(|&a| self.is_primitive(a))
            .expect("every finite field has a primitive element")
    }
}

/// Which combining map a kernel uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    /// `x1 = u1 + u2 mod q`.
    ModAdd,
    /// `x1 = u1 + gamma * u2` in `F_q`, i.e. `x = u G_gamma`.
    FieldGamma { gamma: Symbol },
    /// `u1 = x1 + pi(x2) mod q` with the permutation of [`sasoglu_pi`].
    Sasoglu,
}

/// The group acting on posterior vectors by translation of the input symbol.
///
/// Two output symbols whose posteriors differ by such a translation are
/// interchangeable for every descendant of the channel, provided the kernel
/// commutes with the translation. `Trivial` is used for kernels where it does not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftGroup {
    /// `x -> x + s mod q`.
    Cyclic,
    /// `x -> x xor s` (additive group of `F_{2^r}`).
    Xor,
    /// Only the identity.
    Trivial,
}

impl ShiftGroup {
    #[inline]
    pub fn apply(self, q: usize, x: Symbol, s: Symbol) -> Symbol {
        match self {
            ShiftGroup::Cyclic => {
                let v = x + s;
                if v >= q {
                    v - q
                } else {
                    v
                }
            }
            ShiftGroup::Xor => x ^ s,
            ShiftGroup::Trivial => x,
        }
    }

    /// Number of group elements; shifts are `0..size`.
    pub fn size(self, q: usize) -> usize {
        match self {
            ShiftGroup::Trivial => 1,
            _ => q,
        }
    }

    /// Given `p[x + sp] == r[x + sr]` for all `x`, the shift `u` with `r[x + u] == p[x]`.
    pub fn relative(self, q: usize, sr: Symbol, sp: Symbol) -> Symbol {
        match self {
            ShiftGroup::Cyclic => (sr + q - sp) % q,
            ShiftGroup::Xor => sr ^ sp,
            ShiftGroup::Trivial => 0,
        }
    }
}

/// The permutation `pi` of the Sasoglu kernel.
pub fn sasoglu_pi(q: usize, x: Symbol) -> Symbol {
    let half = q / 2;
    if x == 0 {
        half
    } else if x <= half {
        x - 1
    } else {
        x
    }
}

/// Additive inverse modulo `q`.
pub fn negate(q: usize, v: Symbol) -> Symbol {
    (q - v % q) % q
}

#[derive(Debug)]
struct Tables {
    combine: Vec<u16>,
    encode: Vec<u16>,
    invert: Vec<u16>,
}

/// A polarizing kernel over an alphabet of size `q`. Immutable; cheap to clone.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    q: usize,
    kind: KernelKind,
    field: Option<Field>,
    tables: Arc<Tables>,
}

impl PartialEq for KernelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.kind == other.kind
    }
}

impl Eq for KernelSpec {}

impl KernelSpec {
    pub fn mod_add(q: usize) -> Result<Self> {
        check_q(q)?;
        Ok(Self::with_tables(q, KernelKind::ModAdd, None))
    }

    /// Field kernel `G_gamma`; `gamma = None` picks the default primitive element.
    pub fn field_gamma(q: usize, gamma: Option<Symbol>) -> Result<Self> {
        check_q(q)?;
        let field = Field::new(q)?;
        let gamma = match gamma {
            Some(g) => {
                if !field.is_primitive(g) {
                    return Err(Error::domain(format!(
                        "gamma = {g} is not a primitive element of F_{q}"
                    )));
                }
                g
            }
            None => field.primitive_element(),
        };
        Ok(Self::with_tables(
            q,
            KernelKind::FieldGamma { gamma },
            Some(field),
        ))
    }

    pub fn sasoglu(q: usize) -> Result<Self> {
        check_q(q)?;
        Ok(Self::with_tables(q, KernelKind::Sasoglu, None))
    }

    fn with_tables(q: usize, kind: KernelKind, field: Option<Field>) -> Self {
        let mut combine = vec![0u16; q * q];
        for x1 in 0..q {
            for x2 in 0..q {
                let v = match kind {
                    KernelKind::ModAdd => (x1 + x2) % q,
                    KernelKind::FieldGamma { gamma } => {
                        let f = field.expect("field kernel carries its field");
                        f.add(x1, f.mul(gamma, x2))
                    }
                    KernelKind::Sasoglu => (x1 + sasoglu_pi(q, x2)) % q,
                };
                combine[x1 * q + x2] = v as u16;
            }
        }
        let mut invert = vec![0u16; q * q];
        for x1 in 0..q {
            for x2 in 0..q {
                let u1 = combine[x1 * q + x2] as usize;
                invert[u1 * q + x2] = x1 as u16;
            }
        }
        let encode = match kind {
            KernelKind::Sasoglu => invert.clone(),
            _ => combine.clone(),
        };
        KernelSpec {
            q,
            kind,
            field,
            tables: Arc::new(Tables {
                combine,
                encode,
                invert,
            }),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn field(&self) -> Option<Field> {
        self.field
    }

    pub fn is_mod_add(&self) -> bool {
        self.kind == KernelKind::ModAdd
    }

    fn check(&self, x: Symbol) -> Result<()> {
        if x >= self.q {
            Err(Error::domain(format!(
                "symbol {x} out of range for q = {}",
                self.q
            )))
        } else {
            Ok(())
        }
    }

    /// The kernel's combining map `f(x1, x2)`.
    pub fn combine(&self, x1: Symbol, x2: Symbol) -> Result<Symbol> {
        self.check(x1)?;
        self.check(x2)?;
        Ok(self.tables.combine[x1 * self.q + x2] as Symbol)
    }

    /// Solves `combine(x1, x2) == u1` for `x1`.
    pub fn invert_first(&self, u1: Symbol, x2: Symbol) -> Result<Symbol> {
        self.check(u1)?;
        self.check(x2)?;
        Ok(self.tables.invert[u1 * self.q + x2] as Symbol)
    }

    /// First output of the butterfly: the channel input `x1` carrying `(u1, u2)`.
    #[inline]
    pub fn encode_first(&self, u1: Symbol, u2: Symbol) -> Symbol {
        self.tables.encode[u1 * self.q + u2] as Symbol
    }

    /// Row `u1` of the butterfly table: `encode_row(u1)[u2] == encode_first(u1, u2)`.
    #[inline]
    pub(crate) fn encode_row(&self, u1: Symbol) -> &[u16] {
        &self.tables.encode[u1 * self.q..(u1 + 1) * self.q]
    }

    /// Translations of the input symbol that commute with this kernel.
    pub fn shift_group(&self) -> ShiftGroup {
        match (self.kind, self.field) {
            (KernelKind::ModAdd, _) => ShiftGroup::Cyclic,
            (KernelKind::FieldGamma { .. }, Some(Field::Binary { .. })) => ShiftGroup::Xor,
            (KernelKind::FieldGamma { .. }, _) => ShiftGroup::Cyclic,
            (KernelKind::Sasoglu, _) => ShiftGroup::Trivial,
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::ModAdd => write!(f, "modadd(q={})", self.q),
            KernelKind::FieldGamma { gamma } => write!(f, "field(q={}, gamma={gamma})", self.q),
            KernelKind::Sasoglu => write!(f, "sasoglu(q={})", self.q),
        }
    }
}

fn check_q(q: usize) -> Result<()> {
    if !(2..=u16::MAX as usize).contains(&q) {
        return Err(Error::domain(format!("alphabet size q = {q} must be >= 2")));
    }
    Ok(())
}
