//! Exact rational scalars and their text forms.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{FeecError, Result};

/// Exact rational scalar used by every combinatorial computation.
pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Rounds `x` to `digits` decimal places and returns the result as an exact rational.
pub fn round_decimal(x: f64, digits: u32) -> Q {
    let scale = 10f64.powi(digits as i32);
    let n = (x * scale).round();
    let den = BigInt::from(10u64.pow(digits));
    Q::new(BigInt::from(n as i64), den)
}

/// Parses `"p/q"`, integers, and decimal literals with optional exponent.
pub fn parse_rational(text: &str) -> Result<Q> {
    let s = text.trim();
    if s.is_empty() {
        return Err(FeecError::Parse("empty number".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| FeecError::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = den.trim().parse().map_err(|_| FeecError::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(FeecError::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Q::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = s[pos + 1..].parse().map_err(|_| FeecError::Parse(format!("bad exponent in {s:?}")))?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(FeecError::Parse(format!("bad number {s:?}")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(FeecError::Parse(format!("bad number {s:?}")));
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut n: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().unwrap() };
    if negative {
        n = -n;
    }
    let shift = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    Ok(if shift >= 0 {
        Q::from_integer(n * num_traits::pow(ten, shift as usize))
    } else {
        Q::new(n, num_traits::pow(ten, (-shift) as usize))
    })
}

/// Canonical text: an exact decimal when the denominator divides a power of ten, `"p/q"` otherwise.
pub fn format_rational(x: &Q) -> String {
    if x.is_integer() {
        return x.numer().to_string();
    }
    let mut den = x.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while den.is_multiple_of(&two) {
        den /= &two;
        twos += 1;
    }
    while den.is_multiple_of(&five) {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", x.numer(), x.denom());
    }
    let places = twos.max(fives);
    let scaled = x * Q::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.numer().abs().to_string();
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    let sign = if x.is_negative() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

/// `"p/q"` text used by cochain and form persistence.
pub fn format_fraction(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
