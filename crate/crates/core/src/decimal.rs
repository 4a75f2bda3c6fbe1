//! Decimal text helpers: exact decimal parsing and big-integer serde as
//! decimal strings.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;

/// Parses `[-]digits[.digits][e[-]digits]` into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Renders a rational as a decimal string with `places` fractional digits,
/// rounding half away from zero.
pub fn format_rational(x: &BigRational, places: u32) -> String {
    let scale = BigRational::from_integer(num_traits::pow(BigInt::from(10u8), places as usize));
    let scaled = (x * &scale).round().to_integer();
    let negative = scaled < BigInt::zero();
    let digits = if negative { -scaled } else { scaled }.to_string();
    let places = places as usize;
    let body = if places == 0 {
        digits
    } else if digits.len() > places {
        format!("{}.{}", &digits[..digits.len() - places], &digits[digits.len() - places..])
    } else {
        format!("0.{}{}", "0".repeat(places - digits.len()), digits)
    };
    if negative && body.bytes().any(|b| b != b'0' && b != b'.') {
        format!("-{body}")
    } else {
        body
    }
}

/// Exact rational from a ratio of integers.
pub fn ratio(num: i64, den: i64) -> BigRational {
    assert!(den != 0, "zero denominator");
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `ceil(value * num / den)` on non-negative integers, exactly.
pub fn ceil_mul_ratio(value: u128, num: u128, den: u128) -> u128 {
    let r = BigRational::new(BigInt::from(value) * BigInt::from(num), BigInt::from(den));
    let c = r.ceil().to_integer();
    u128::try_from(c).expect("fits in u128")
}

/// Serde adapter writing a `BigUint` as a decimal string.
pub mod biguint_str {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        parse_biguint(&s).ok_or_else(|| D::Error::custom(format!("invalid decimal integer {s:?}")))
    }
}

/// Serde adapter for `Vec<BigUint>` as decimal strings.
pub mod biguint_vec_str {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_biguint(s).ok_or_else(|| D::Error::custom(format!("invalid decimal integer {s:?}"))))
            .collect()
    }
}

/// Serde adapter for `Vec<BigInt>` as decimal strings.
pub mod bigint_vec_str {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| {
                BigInt::parse_bytes(s.trim().as_bytes(), 10)
                    .ok_or_else(|| D::Error::custom(format!("invalid decimal integer {s:?}")))
            })
            .collect()
    }
}

fn parse_biguint(s: &str) -> Option<BigUint> {
    let s = s.trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigUint::parse_bytes(s.as_bytes(), 10)
}
