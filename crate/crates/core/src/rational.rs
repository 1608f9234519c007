//! Exact rational helpers: decimal parsing, half-even rounding and rendering.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn from_usize(n: usize) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"0.95"`, `"7/10"`, `"3"` or `"-0.5"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Input(format!("not a decimal or fraction: {text:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
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
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

/// Converts a float through its shortest round-trip decimal form, so `0.95` becomes `19/20`.
pub fn from_f64_decimal(value: f64) -> Result<Rational> {
    if !value.is_finite() {
        return Err(Error::Input(format!("non-finite number {value}")));
    }
    parse_rational(&format!("{value}"))
}

/// Nearest integer, ties to even.
pub fn round_half_even(value: &Rational) -> BigInt {
    let floor = value.floor().to_integer();
    let frac = value - Rational::from_integer(floor.clone());
    let twice = &frac * from_usize(2);
    if twice > Rational::one() || (twice == Rational::one() && floor.is_odd()) {
        floor + 1
    } else {
        floor
    }
}

/// `round_half_even(value * n)` as a count; `value` must be non-negative.
pub fn round_share(value: &Rational, n: usize) -> usize {
    let r = round_half_even(&(value * from_usize(n)));
    r.try_into().unwrap_or(0)
}

/// Fixed-point rendering with `places` decimals, rounded half-even.
pub fn format_decimal(value: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = round_half_even(&(value * Rational::from_integer(scale.clone())));
    let negative = scaled.is_negative();
    let (int_part, frac_part) = scaled.abs().div_rem(&scale);
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part:0>places$}")
    }
}

/// Exact text form: a terminating decimal when the denominator allows it, `n/d` otherwise.
pub fn render_exact(value: &Rational) -> String {
    let mut denom = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&denom % &two).is_zero() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    format_decimal(value, twos.max(fives).max(1))
}

pub fn to_f64(value: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.95").unwrap(), ratio(19, 20));
        assert_eq!(parse_rational("7/10").unwrap(), ratio(7, 10));
        assert_eq!(parse_rational("1").unwrap(), ratio(1, 1));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), ratio(-1, 4));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("").is_err());
        assert_eq!(from_f64_decimal(0.99).unwrap(), ratio(99, 100));
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(&ratio(5, 2)), BigInt::from(2));
        assert_eq!(round_half_even(&ratio(7, 2)), BigInt::from(4));
        assert_eq!(round_half_even(&ratio(13, 10)), BigInt::from(1));
        assert_eq!(round_half_even(&ratio(17, 10)), BigInt::from(2));
        assert_eq!(round_share(&ratio(7, 10), 10), 7);
        assert_eq!(round_share(&ratio(1, 2), 5), 2);
        assert_eq!(round_share(&ratio(1, 2), 7), 4);
    }

    #[test]
    fn renders_decimals() {
        assert_eq!(format_decimal(&ratio(1, 3), 3), "0.333");
        assert_eq!(format_decimal(&ratio(2, 3), 3), "0.667");
        assert_eq!(format_decimal(&ratio(1, 8), 2), "0.12");
        assert_eq!(format_decimal(&ratio(3, 8), 2), "0.38");
        assert_eq!(format_decimal(&ratio(1, 1), 3), "1.000");
        assert_eq!(format_decimal(&ratio(-1, 3), 2), "-0.33");
        assert_eq!(render_exact(&ratio(19, 20)), "0.95");
        assert_eq!(render_exact(&ratio(0, 1)), "0.0");
        assert_eq!(render_exact(&ratio(1, 3)), "1/3");
    }
}
