//! Exact dyadic rationals `m / 2^e`.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};

/// `num / 2^exp`, kept with `num` odd or zero (and then `exp = 0`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    exp: u32,
}

impl Dyadic {
    pub fn new(num: impl Into<BigInt>, exp: u32) -> Self {
        let mut num = num.into();
        let mut exp = exp;
        if num.is_zero() {
            return Self { num, exp: 0 };
        }
        let tz = num.trailing_zeros().unwrap_or(0).min(exp as u64) as u32;
        num >>= tz;
        exp -= tz;
        Self { num, exp }
    }

    pub fn zero() -> Self {
        Self::new(0, 0)
    }

    pub fn one() -> Self {
        Self::new(1, 0)
    }

    /// Exact value of a finite `f64`; every finite double is dyadic.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let bits = x.abs().to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if raw_exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), raw_exp - 1075) };
        let mut num = BigInt::from(mant);
        if x < 0.0 {
            num = -num;
        }
        if e >= 0 {
            Some(Self::new(num << e as usize, 0))
        } else {
            Some(Self::new(num, (-e) as u32))
        }
    }

    /// Parses `m/2^e`, `m/d` with `d` a power of two, or a decimal that is exactly dyadic.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let m: i64 = a.trim().parse().ok()?;
            let b = b.trim();
            let e = if let Some(p) = b.strip_prefix("2^") {
                p.parse::<u32>().ok()?
            } else {
                let d: u64 = b.parse().ok()?;
                if !d.is_power_of_two() {
                    return None;
                }
                d.trailing_zeros()
            };
            return Some(Self::new(m, e));
        }
        // a decimal a / 10^k is dyadic iff 5^k divides a
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits: BigInt = format!("{int}{frac}").parse().ok()?;
        let k = frac.len() as u32;
        let five = BigInt::from(5u32).pow(k);
        if !(&digits % &five).is_zero() {
            return None;
        }
        let m = digits / five;
        Some(Self::new(if neg { -m } else { m }, k))
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    /// Power of two in the reduced denominator.
    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn to_f64(&self) -> f64 {
        let n = self.num.to_f64().unwrap_or(f64::NAN);
        n * 2f64.powi(-(self.exp as i32))
    }

    /// `2^{-k}`.
    pub fn pow2_neg(k: u32) -> Self {
        Self::new(1, k)
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u32) {
        let e = self.exp.max(other.exp);
        (&self.num << (e - self.exp) as usize, &other.num << (e - other.exp) as usize, e)
    }

    pub fn one_minus(&self) -> Self {
        &Self::one() - self
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a + b, e)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a - b, e)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &rhs.num, self.exp + rhs.exp)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else if self.exp < 64 {
            write!(f, "{}/{}", self.num, BigInt::one() << self.exp as usize)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}
