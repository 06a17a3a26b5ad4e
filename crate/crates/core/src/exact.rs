//! Exact rational helpers: parsing, canonical formatting, and comparisons of
//! rationals against powers of two with rational exponents.
//!
//! A comparison `a/b` vs `2^(c/d)` with `d > 0` is decided as `a^d` vs
//! `b^d * 2^c` on big integers, so level boundaries never depend on float
//! rounding.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{AddAssign, SubAssign};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Parses `"a/b"` (or a bare integer `"a"`) into a rational in lowest terms.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("expected a rational \"a/b\", got {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let digits = |t: &str| {
        let t = t.strip_prefix('-').unwrap_or(t);
        !t.is_empty() && t.bytes().all(|c| c.is_ascii_digit())
    };
    if !digits(num) || !digits(den) {
        return Err(bad());
    }
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

/// Canonical `"a/b"` form in lowest terms with a positive denominator.
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn rational(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `num / den` as a reduced rational.
pub fn ratio(num: &BigUint, den: &BigUint) -> Rational {
    Rational::new(
        BigInt::from_biguint(Sign::Plus, num.clone()),
        BigInt::from_biguint(Sign::Plus, den.clone()),
    )
}

/// Splits a non-negative rational into unsigned numerator and denominator.
pub fn parts(r: &Rational) -> (BigUint, BigUint) {
    debug_assert!(!r.is_negative());
    (
        r.numer().magnitude().clone(),
        r.denom().magnitude().clone(),
    )
}

pub fn in_open_unit(r: &Rational) -> bool {
    r.is_positive() && r < &Rational::one()
}

pub fn in_half_open_unit(r: &Rational) -> bool {
    r.is_positive() && r <= &Rational::one()
}

/// `log2(x)` for a big unsigned integer; `-inf` for zero.
pub fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 64;
    let top: BigUint = x >> shift;
    (top.to_u64().unwrap() as f64).log2() + shift as f64
}

/// `log2(num / den)`.
pub fn log2_ratio(num: &BigUint, den: &BigUint) -> f64 {
    log2_big(num) - log2_big(den)
}

/// `num / den` as the nearest-ish `f64` (relative error around 1e-16).
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = num.bits().max(den.bits()).saturating_sub(60);
    let a = (num >> shift).to_f64().unwrap_or(0.0);
    let b = (den >> shift).to_f64().unwrap_or(0.0);
    if a > 0.0 && b > 0.0 {
        a / b
    } else {
        log2_ratio(num, den).exp2()
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    let (n, d) = (r.numer().magnitude(), r.denom().magnitude());
    let v = ratio_to_f64(n, d);
    if r.is_negative() {
        -v
    } else {
        v
    }
}

fn pow(x: &BigUint, e: u32) -> BigUint {
    num_traits::pow::pow(x.clone(), e as usize)
}

fn pow2(e: u64) -> BigUint {
    BigUint::one() << e
}

fn exponent_parts(exp: &Rational) -> Result<(BigInt, u32)> {
    let d = exp
        .denom()
        .to_u32()
        .ok_or_else(|| Error::Parameter(format!("exponent denominator too large in {exp}")))?;
    Ok((exp.numer().clone(), d))
}

fn shift_amount(c: &BigInt) -> Result<u64> {
    c.magnitude()
        .to_u64()
        .filter(|&v| v < (1 << 32))
        .ok_or_else(|| Error::Parameter(format!("exponent {c} too large")))
}

/// Compares `num / den` against `2^exp` exactly.
pub fn cmp_ratio_pow2(num: &BigUint, den: &BigUint, exp: &Rational) -> Result<Ordering> {
    let (c, d) = exponent_parts(exp)?;
    let shift = shift_amount(&c)?;
    let lhs = pow(num, d);
    let rhs = pow(den, d);
    Ok(if c.is_negative() {
        (lhs << shift).cmp(&rhs)
    } else {
        lhs.cmp(&(rhs << shift))
    })
}

/// Compares `(1/n) log2(count)` against the rational `rate`, i.e. `count` vs `2^(n * rate)`.
pub fn cmp_log_rate(count: u64, n: usize, rate: &Rational) -> Result<Ordering> {
    if count == 0 {
        return Ok(Ordering::Less);
    }
    let exp = rate * Rational::from_integer(BigInt::from(n));
    cmp_ratio_pow2(&BigUint::from(count), &BigUint::one(), &exp)
}

/// Number of spectrum levels above the zero level: the least `K >= 0` with
/// `K * delta >= log2(alphabet_size)`.
pub fn k_delta(alphabet_size: usize, delta: &Rational) -> Result<usize> {
    if !in_open_unit(delta) {
        return Err(Error::Parameter(format!(
            "delta must lie in (0, 1), got {}",
            fmt_rational(delta)
        )));
    }
    let (c, d) = parts(delta);
    let c = c.to_u64().unwrap_or(u64::MAX);
    let d = d.to_u32().ok_or_else(|| Error::Parameter("delta denominator too large".into()))?;
    let target = pow(&BigUint::from(alphabet_size), d);
    let mut k = 0usize;
    while pow2(k as u64 * c) < target {
        k += 1;
    }
    Ok(k)
}

/// Index of the spectrum level holding a sequence of probability `num / den > 0`:
/// the largest `k <= k_max` with `num/den <= 2^(-n k delta)`.
pub fn level_index(num: &BigUint, den: &BigUint, n: usize, delta: &Rational, k_max: usize) -> usize {
    debug_assert!(!num.is_zero());
    let (c, d) = parts(delta);
    let d = d.to_u32().expect("delta denominator checked by k_delta");
    let q = pow(den, d) / pow(num, d);
    if q.is_zero() {
        return 0;
    }
    let e = q.bits() - 1;
    let step = (n as u64) * c.to_u64().expect("delta numerator fits");
    ((e / step) as usize).min(k_max)
}

pub fn ceil_div(a: &BigUint, b: &BigUint) -> BigUint {
    a.div_ceil(b)
}

/// Exact weights used by the combinatorial solvers. Implemented for `u128`
/// (fast path when every sum fits) and `BigUint`.
pub trait Weight:
    Clone + Ord + Zero + Debug + Send + Sync + for<'a> AddAssign<&'a Self> + for<'a> SubAssign<&'a Self>
{
    fn from_big(x: &BigUint) -> Option<Self>;
    fn to_big(&self) -> BigUint;
}

impl Weight for u128 {
    fn from_big(x: &BigUint) -> Option<Self> {
        x.to_u128()
    }
    fn to_big(&self) -> BigUint {
        BigUint::from(*self)
    }
}

impl Weight for BigUint {
    fn from_big(x: &BigUint) -> Option<Self> {
        Some(x.clone())
    }
    fn to_big(&self) -> BigUint {
        self.clone()
    }
}

/// True when `bound` leaves enough headroom for `u128` sums.
pub fn fits_u128(bound: &BigUint) -> bool {
    bound.bits() < 126
}
