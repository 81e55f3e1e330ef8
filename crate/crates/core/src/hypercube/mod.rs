//! Exact influence computations on `{0,1}^N` under product Bernoulli measures
//! and the fair-bit encoding of dyadic Bernoulli variables.
//!
//! Every probability here is a dyadic rational and is computed exactly; only
//! quantities involving logarithms are reported as floats.

pub mod dyadic;

pub use dyadic::Dyadic;

use crate::par;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of input bits of a table.
pub const MAX_BITS: usize = 24;
/// Largest total encoding depth; weights are then exact in `u128`.
const MAX_DEPTH: u32 = 96;
const CHUNK: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypercubeError {
    #[error("{0} bits exceed the limit of {MAX_BITS}")]
    TooManyBits(usize),
    #[error("invalid probability: {0}")]
    BadProbability(String),
    #[error("truth table has {got} entries, expected {want}")]
    TableLength { got: usize, want: usize },
    #[error("variable index {0} out of range")]
    NoSuchVariable(usize),
}

/// Packed truth table of a function on `{0,1}^n`; bit `i` of the index is `x_{i+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    n: usize,
    words: Vec<u64>,
}

impl Table {
    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Result<Self, HypercubeError> {
        if n > MAX_BITS {
            return Err(HypercubeError::TooManyBits(n));
        }
        let len = 1usize << n;
        let mut words = vec![0u64; len.div_ceil(64)];
        for x in 0..len {
            if f(x) {
                words[x / 64] |= 1 << (x % 64);
            }
        }
        Ok(Self { n, words })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self, HypercubeError> {
        let n = bits.len().trailing_zeros() as usize;
        if !bits.len().is_power_of_two() {
            return Err(HypercubeError::TableLength { got: bits.len(), want: 1 << (n + 1) });
        }
        Self::from_fn(n, |x| bits[x])
    }

    /// The `id`-th function on `n ≤ 6` bits: bit `x` of `id` is `f(x)`.
    pub fn numbered(n: usize, id: u64) -> Result<Self, HypercubeError> {
        if n > 6 {
            return Err(HypercubeError::TooManyBits(n));
        }
        Self::from_fn(n, |x| id >> x & 1 == 1)
    }

    pub fn bits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, x: usize) -> bool {
        self.words[x / 64] >> (x % 64) & 1 == 1
    }
}

/// A Boolean function with a dyadic success probability for each input bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanFunction {
    table: Table,
    p: Vec<Dyadic>,
    /// `p_i = m_i 2^{-ℓ_i}` with `ℓ_i` the reduced depth.
    m: Vec<u128>,
    depth: Vec<u32>,
}

impl BooleanFunction {
    /// Requires every `p_i` in `(0, 1/2]`.
    pub fn new(table: Table, p: Vec<Dyadic>) -> Result<Self, HypercubeError> {
        let half = Dyadic::new(1, 1);
        for (i, pi) in p.iter().enumerate() {
            if pi.is_negative() || pi.is_zero() || *pi > half {
                return Err(HypercubeError::BadProbability(format!("p_{} = {pi} is not in (0, 1/2]", i + 1)));
            }
        }
        Self::unrestricted(table, p)
    }

    /// Same as [`BooleanFunction::new`] but accepting any `p_i` in `[0, 1]`.
    fn unrestricted(table: Table, p: Vec<Dyadic>) -> Result<Self, HypercubeError> {
        if p.len() != table.n {
            return Err(HypercubeError::BadProbability(format!("{} probabilities for {} bits", p.len(), table.n)));
        }
        let depth: Vec<u32> = p.iter().map(|x| x.exponent()).collect();
        if depth.iter().sum::<u32>() > MAX_DEPTH {
            return Err(HypercubeError::BadProbability(format!("total depth above {MAX_DEPTH}")));
        }
        let mut m = Vec::with_capacity(p.len());
        for pi in &p {
            if pi.is_negative() || *pi > Dyadic::one() {
                return Err(HypercubeError::BadProbability(format!("{pi} is not a probability")));
            }
            m.push(u128::try_from(pi.numerator()).map_err(|_| HypercubeError::BadProbability(pi.to_string()))?);
        }
        Ok(Self { table, p, m, depth })
    }

    /// Uniform measure: every `p_i = 1/2`.
    pub fn uniform(table: Table) -> Self {
        let n = table.n;
        Self::new(table, vec![Dyadic::new(1, 1); n]).expect("one half is valid")
    }

    pub fn dictator(n: usize, p: Vec<Dyadic>) -> Result<Self, HypercubeError> {
        Self::new(Table::from_fn(n, |x| x & 1 == 1)?, p)
    }

    pub fn constant(n: usize, value: bool, p: Vec<Dyadic>) -> Result<Self, HypercubeError> {
        Self::new(Table::from_fn(n, |_| value)?, p)
    }

    pub fn and(n: usize, p: Vec<Dyadic>) -> Result<Self, HypercubeError> {
        Self::new(Table::from_fn(n, |x| x == (1 << n) - 1)?, p)
    }

    pub fn majority(n: usize, p: Vec<Dyadic>) -> Result<Self, HypercubeError> {
        Self::new(Table::from_fn(n, |x| 2 * x.count_ones() as usize > n)?, p)
    }

    pub fn bits(&self) -> usize {
        self.table.n
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn p(&self) -> &[Dyadic] {
        &self.p
    }

    pub fn depth(&self) -> &[u32] {
        &self.depth
    }

    pub fn with_p(&self, i: usize, value: Dyadic) -> Result<Self, HypercubeError> {
        let mut p = self.p.clone();
        *p.get_mut(i).ok_or(HypercubeError::NoSuchVariable(i))? = value;
        Self::unrestricted(self.table.clone(), p)
    }

    fn total_depth(&self) -> u32 {
        self.depth.iter().sum()
    }

    /// `2^{Σℓ} · P(x)`; coordinate `skip` contributes `2^{ℓ_skip}` instead of its law.
    #[inline]
    fn weight(&self, x: usize, skip: usize) -> u128 {
        let mut w: u128 = 1;
        for i in 0..self.table.n {
            let full = 1u128 << self.depth[i];
            let f = if i == skip {
                full
            } else if x >> i & 1 == 1 {
                self.m[i]
            } else {
                full - self.m[i]
            };
            w *= f;
        }
        w
    }

    /// `Σ_x 2^{Σℓ} P(x) g(x)` by chunks, in parallel for large tables.
    fn sum_weighted(&self, skip: usize, g: impl Fn(usize) -> bool + Sync + Send) -> u128 {
        let len = self.table.len();
        let run = |lo: usize, hi: usize| -> u128 { (lo..hi).filter(|&x| g(x)).map(|x| self.weight(x, skip)).sum() };
        if len <= CHUNK {
            return run(0, len);
        }
        let chunks = len.div_ceil(CHUNK) as u64;
        par::map_indexed(0, chunks, |c| {
            let lo = c as usize * CHUNK;
            run(lo, (lo + CHUNK).min(len))
        })
        .into_iter()
        .sum()
    }

    /// `P(f = 1)`.
    pub fn prob_one(&self) -> Dyadic {
        let num = self.sum_weighted(usize::MAX, |x| self.table.get(x));
        Dyadic::new(num, self.total_depth())
    }

    pub fn variance(&self) -> Dyadic {
        let p = self.prob_one();
        &p * &p.one_minus()
    }

    /// `Inf_i(f) = P(f ∘ τ_i ≠ f)`, `i` counted from zero.
    pub fn influence(&self, i: usize) -> Dyadic {
        assert!(i < self.bits(), "variable index out of range");
        let num = self.sum_weighted(usize::MAX, |x| self.table.get(x) != self.table.get(x ^ (1 << i)));
        Dyadic::new(num, self.total_depth())
    }

    pub fn influences(&self) -> Vec<Dyadic> {
        (0..self.bits()).map(|i| self.influence(i)).collect()
    }

    /// `P(f = 1 | x_i = 1) - P(f = 1 | x_i = 0)`, the derivative of `P(f = 1)` in `p_i`.
    pub fn signed_pivotal(&self, i: usize) -> Dyadic {
        let bit = 1 << i;
        let up = self.sum_weighted(i, |x| x & bit == 0 && self.table.get(x | bit));
        let down = self.sum_weighted(i, |x| x & bit == 0 && self.table.get(x));
        let e = self.total_depth();
        &Dyadic::new(up, e) - &Dyadic::new(down, e)
    }

    /// `f̃` on the fair bits encoding each `Y_i = 1[π_i ≥ 1 - p_i]`.
    pub fn lift(&self) -> Result<Lifted, HypercubeError> {
        let total = self.total_depth() as usize;
        if total > MAX_BITS {
            return Err(HypercubeError::TooManyBits(total));
        }
        let mut offsets = Vec::with_capacity(self.bits());
        let mut acc = 0u32;
        for &l in &self.depth {
            offsets.push(acc);
            acc += l;
        }
        let encoders: Vec<DyadicBit> = self.m.iter().zip(&self.depth).map(|(&m, &l)| DyadicBit { m: m as u64, ell: l }).collect();
        let table = Table::from_fn(total, |y| {
            let mut x = 0usize;
            for (i, enc) in encoders.iter().enumerate() {
                let pattern = (y >> offsets[i]) as u64 & ((1u64 << enc.ell) - 1);
                if enc.y(pattern) {
                    x |= 1 << i;
                }
            }
            self.table.get(x)
        })?;
        Ok(Lifted { function: BooleanFunction::uniform(table), offsets, encoders })
    }
}

/// Fair-bit encoding of a Bernoulli(`m 2^{-ℓ}`) variable.
///
/// Bit `k - 1` of a pattern is `X_k`, so `π = Σ X_k 2^{-k}` has numerator
/// `Σ X_k 2^{ℓ-k}` over `2^ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicBit {
    pub m: u64,
    pub ell: u32,
}

impl DyadicBit {
    pub fn p(&self) -> Dyadic {
        Dyadic::new(self.m, self.ell)
    }

    /// Numerator of `π` over `2^ℓ`.
    pub fn pi(&self, pattern: u64) -> u64 {
        (0..self.ell).map(|k| (pattern >> k & 1) << (self.ell - 1 - k)).sum()
    }

    /// `Y = 1[π ≥ 1 - p]`.
    pub fn y(&self, pattern: u64) -> bool {
        self.pi(pattern) + self.m >= 1 << self.ell
    }

    /// Largest `j ≥ 1` with `2^{-j} ≥ p`.
    pub fn j_star(&self) -> u32 {
        let mut j = 1;
        while j < 64 && (self.m as u128) << (j + 1) <= 1u128 << self.ell {
            j += 1;
        }
        j
    }

    /// Probability that switching `X_j` (`j ≥ 1`) changes `Y`.
    pub fn flip_probability(&self, j: u32) -> Dyadic {
        assert!(1 <= j && j <= self.ell, "bit index out of range");
        let bit = 1u64 << (j - 1);
        let flips = (0..1u64 << self.ell).filter(|&x| x & bit == 0 && self.y(x) != self.y(x | bit)).count();
        Dyadic::new(flips as u64, self.ell - 1)
    }

    /// `2^{-(j-1)}` for `j ≥ j*`, else `2p`.
    pub fn flip_bound(&self, j: u32) -> Dyadic {
        if j >= self.j_star() {
            Dyadic::pow2_neg(j - 1)
        } else {
            Dyadic::new(2 * self.m, self.ell)
        }
    }
}

/// `f̃` with the layout of its input bits.
#[derive(Clone, Debug)]
pub struct Lifted {
    /// `f̃` under fair bits.
    pub function: BooleanFunction,
    /// First fair bit of each original variable.
    pub offsets: Vec<u32>,
    pub encoders: Vec<DyadicBit>,
}

impl Lifted {
    /// Influence of `X_{i,j}` on `f̃` (`i` from zero, `j` from one).
    pub fn bit_influence(&self, i: usize, j: u32) -> Dyadic {
        self.function.influence((self.offsets[i] + j - 1) as usize)
    }
}

/// Terms of `Σ p_i |ln p_i| Inf_i(f) ≥ C Var(f) ln(1 / max p_i Inf_i(f))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TalagrandCheck {
    pub lhs: f64,
    pub variance: f64,
    pub max_term: f64,
    /// `lhs / (Var · ln(1/max_term))`; `+∞` when `Var = 0`.
    pub implied_c: f64,
    pub degenerate: bool,
}

pub fn talagrand_check(f: &BooleanFunction) -> TalagrandCheck {
    let inf = f.influences();
    let var = f.variance();
    let lhs: f64 = f.p().iter().zip(&inf).map(|(p, i)| p.to_f64() * -p.to_f64().ln() * i.to_f64()).sum();
    let max_term = f.p().iter().zip(&inf).map(|(p, i)| p * i).max().unwrap_or_else(Dyadic::zero);
    let degenerate = var.is_zero();
    let implied_c = if degenerate { f64::INFINITY } else { lhs / (var.to_f64() * (1.0 / max_term.to_f64()).ln()) };
    TalagrandCheck { lhs, variance: var.to_f64(), max_term: max_term.to_f64(), implied_c, degenerate }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitCheck {
    pub j: u32,
    pub influence: String,
    pub flip_probability: String,
    pub bound: String,
    /// `Inf_{i,j}(f̃) = P(flip) · Inf_i(f)` exactly.
    pub identity: bool,
    /// `P(flip) ≤ bound` exactly.
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingReport {
    pub i: usize,
    pub j_star: u32,
    pub bits: Vec<BitCheck>,
    /// `Σ_j Inf_{i,j}(f̃)`.
    pub aggregate: f64,
    /// `4 p_i |ln p_i| Inf_i(f)`.
    pub aggregate_bound: f64,
    pub aggregate_holds: bool,
}

impl EncodingReport {
    pub fn all_hold(&self) -> bool {
        self.aggregate_holds && self.bits.iter().all(|b| b.identity && b.within_bound)
    }
}

/// Checks the per-bit identity and both bounds for variable `i` of `f`.
///
/// The aggregate bound compares an exact dyadic with a logarithm, which is
/// irrational for every `p_i < 1`, so a relative guard of `1e-12` cannot hide
/// a real violation.
pub fn encoding_bounds_check(f: &BooleanFunction, lifted: &Lifted, i: usize) -> EncodingReport {
    let inf_i = f.influence(i);
    let enc = lifted.encoders[i];
    let mut aggregate = Dyadic::zero();
    let bits = (1..=enc.ell)
        .map(|j| {
            let influence = lifted.bit_influence(i, j);
            let flip = enc.flip_probability(j);
            let bound = enc.flip_bound(j);
            aggregate = &aggregate + &influence;
            BitCheck {
                j,
                identity: influence == &flip * &inf_i,
                within_bound: flip <= bound,
                influence: influence.to_string(),
                flip_probability: flip.to_string(),
                bound: bound.to_string(),
            }
        })
        .collect();
    let p = enc.p().to_f64();
    let aggregate_bound = 4.0 * p * -p.ln() * inf_i.to_f64();
    let aggregate = aggregate.to_f64();
    EncodingReport {
        i,
        j_star: enc.j_star(),
        bits,
        aggregate,
        aggregate_bound,
        aggregate_holds: aggregate <= aggregate_bound * (1.0 + 1e-12),
    }
}

#[cfg(test)]
mod tests;
