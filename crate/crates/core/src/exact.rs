//! Exact rational arithmetic helpers shared by every oracle.
//!
//! All enumeration oracles work over [`Q`] (arbitrary precision rationals) so
//! that dominance assertions can be made with zero tolerance.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn qu(v: u64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// Exact conversion of a finite float (every finite `f64` is a dyadic rational).
pub fn q_from_f64(v: f64) -> Result<Q> {
    Q::from_float(v).ok_or_else(|| Error::Malformed(format!("non-finite number {v}")))
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"num/den"`, an integer, or a decimal literal (optionally with an
/// exponent). Decimal literals are read exactly, so `"0.1"` is `1/10`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let num = parse_decimal(n)?;
        let den = parse_decimal(d)?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(num / den);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Q> {
    let bad = || Error::Parse(format!("not a number: {s:?}"));
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = body[pos + 1..].parse().map_err(|_| bad())?;
            (&body[..pos], e)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = if digits.is_empty() {
        "0".to_string()
    } else {
        digits
    };
    let n: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i64;
    if scale.unsigned_abs() > 4096 {
        return Err(bad());
    }
    let ten = BigInt::from(10u32);
    let mut v = Q::from_integer(n);
    if scale >= 0 {
        v *= Q::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        v /= Q::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -v } else { v })
}

/// Renders `num/den`, or just `num` for integers.
pub fn format_q(v: &Q) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn pow_q(base: &Q, exp: u32) -> Q {
    num_traits::pow(base.clone(), exp as usize)
}

pub fn floor_q(v: &Q) -> BigInt {
    v.floor().to_integer()
}

pub fn ceil_q(v: &Q) -> BigInt {
    v.ceil().to_integer()
}

pub fn binom(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

pub fn binom_q(n: u64, k: u64) -> Q {
    Q::from_integer(BigInt::from(binom(n, k)))
}

/// `C(n, k)` as a float; exact for results below 2^53.
pub fn binom_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Real-argument binomial `x(x-1)...(x-k+1)/k!`.
pub fn binom_real(x: f64, k: u64) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (x - i as f64) / (i + 1) as f64;
    }
    acc
}

pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub fn ln_factorial(n: u64) -> f64 {
    // exact summation is fine at desk scale; Stirling beyond
    if n < 4096 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    } else {
        let x = n as f64;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
    }
}

/// Exact `Pr[Bin(n, p) = j]` for `j = 0..=n`.
pub fn binomial_pmf(n: u64, p: &Q) -> Vec<Q> {
    let one_minus = Q::one() - p;
    let mut p_pows = Vec::with_capacity(n as usize + 1);
    let mut q_pows = Vec::with_capacity(n as usize + 1);
    let mut a = Q::one();
    let mut b = Q::one();
    for _ in 0..=n {
        p_pows.push(a.clone());
        q_pows.push(b.clone());
        a *= p;
        b *= &one_minus;
    }
    (0..=n)
        .map(|j| binom_q(n, j) * &p_pows[j as usize] * &q_pows[(n - j) as usize])
        .collect()
}

/// Exact `Pr[Bin(n, p) >= s]`.
pub fn binomial_tail(n: u64, p: &Q, s: u64) -> Q {
    if s == 0 {
        return Q::one();
    }
    if s > n {
        return Q::zero();
    }
    binomial_pmf(n, p).into_iter().skip(s as usize).sum()
}

/// Smallest integer `>= v`, clamped below at zero, as `u64`.
pub fn ceil_nonneg_u64(v: &Q) -> u64 {
    let c = ceil_q(v);
    if c.is_negative() {
        0
    } else {
        c.to_u64().unwrap_or(u64::MAX)
    }
}

pub fn floor_nonneg_u64(v: &Q) -> u64 {
    let f = floor_q(v);
    if f.is_negative() {
        0
    } else {
        f.to_u64().unwrap_or(u64::MAX)
    }
}

const ROUND_BITS: usize = 256;

fn round_down(v: &Q) -> Q {
    let scale = BigInt::one() << ROUND_BITS;
    let n = (v * Q::from_integer(scale.clone())).floor().to_integer();
    Q::new(n, scale)
}

fn round_up(v: &Q) -> Q {
    let scale = BigInt::one() << ROUND_BITS;
    let n = (v * Q::from_integer(scale.clone())).ceil().to_integer();
    Q::new(n, scale)
}

/// Certified rational enclosure `(lo, hi)` of `exp(x)` for rational `x >= 0`.
///
/// Range-reduces to `x / 2^r <= 1/2`, bounds the Taylor remainder by a
/// geometric series, rounds outward to 256 fractional bits, then squares back.
pub fn exp_bounds(x: &Q) -> (Q, Q) {
    assert!(!x.is_negative(), "exp_bounds requires x >= 0");
    let half = q(1, 2);
    let mut y = x.clone();
    let mut r = 0u32;
    while y > half {
        y /= qi(2);
        r += 1;
    }
    const TERMS: u64 = 30;
    let mut sum = Q::zero();
    let mut term = Q::one();
    for k in 0..=TERMS {
        if k > 0 {
            term = term * &y / qu(k);
        }
        sum += &term;
    }
    let next = term * &y / qu(TERMS + 1);
    let tail = next / (Q::one() - &y / qu(TERMS + 2));
    let mut lo = round_down(&sum);
    let mut hi = round_up(&(sum + tail));
    for _ in 0..r {
        lo = round_down(&(&lo * &lo));
        hi = round_up(&(&hi * &hi));
    }
    (lo, hi)
}

/// Certified enclosure `(lo, hi)` of `exp(-x)` for rational `x >= 0`.
pub fn exp_neg_bounds(x: &Q) -> (Q, Q) {
    let (lo, hi) = exp_bounds(x);
    (hi.recip(), lo.recip())
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}
