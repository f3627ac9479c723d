//! Exact rational numbers used as predicate arguments.
//!
//! Integers and decimal literals are both stored as reduced `i64` ratios so
//! equality, ordering and hashing never depend on floating point rounding.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Number(Rational64);

impl Number {
    pub fn from_int(value: i64) -> Self {
        Number(Rational64::from_integer(value))
    }

    /// Builds `numer / denom`, returning `None` for a zero denominator.
    pub fn from_ratio(numer: i64, denom: i64) -> Option<Self> {
        if denom == 0 {
            return None;
        }
        Some(Number(Rational64::new(numer, denom)))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_add(&self, other: &Number) -> Option<Number> {
        self.0.checked_add(&other.0).map(Number)
    }

    pub fn checked_sub(&self, other: &Number) -> Option<Number> {
        self.0.checked_sub(&other.0).map(Number)
    }

    pub fn checked_mul(&self, other: &Number) -> Option<Number> {
        self.0.checked_mul(&other.0).map(Number)
    }

    /// `None` on division by zero or overflow.
    pub fn checked_div(&self, other: &Number) -> Option<Number> {
        if other.is_zero() {
            return None;
        }
        self.0.checked_div(&other.0).map(Number)
    }

    pub fn checked_abs(&self) -> Option<Number> {
        if self.numer() == i64::MIN {
            return None;
        }
        Some(Number(self.0.abs()))
    }

    /// Decimal expansion if the denominator only has factors 2 and 5.
    fn terminating_decimal(&self) -> Option<String> {
        let mut denom = self.denom();
        let (mut twos, mut fives) = (0u32, 0u32);
        while denom % 2 == 0 {
            denom /= 2;
            twos += 1;
        }
        while denom % 5 == 0 {
            denom /= 5;
            fives += 1;
        }
        if denom != 1 {
            return None;
        }
        let digits = twos.max(fives);
        let scale = 10i128.checked_pow(digits)?;
        let scaled = (self.numer() as i128).checked_mul(scale / self.denom() as i128)?;
        let negative = scaled < 0;
        let magnitude = scaled.unsigned_abs();
        let int_part = magnitude / scale as u128;
        let frac_part = magnitude % scale as u128;
        Some(format!(
            "{}{}.{:0width$}",
            if negative { "-" } else { "" },
            int_part,
            frac_part,
            width = digits as usize
        ))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for Number {
    fn from(value: i64) -> Self {
        Number::from_int(value)
    }
}

/// Integers print plainly, terminating fractions as decimals, anything else
/// as `numer/denom`. Every form parses back to the same value.
impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            return write!(f, "{}", self.numer());
        }
        match self.terminating_decimal() {
            Some(text) => f.write_str(&text),
            None => write!(f, "{}/{}", self.numer(), self.denom()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid number literal `{0}`")]
pub struct NumberParseError(pub String);

impl FromStr for Number {
    type Err = NumberParseError;

    /// Accepts `-?digits`, `-?digits.digits` and `-?digits/digits`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || NumberParseError(text.to_string());
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        let value = if let Some((int, frac)) = body.split_once('.') {
            if !all_digits(int) || !all_digits(frac) {
                return Err(err());
            }
            let scale = 10i64.checked_pow(frac.len() as u32).ok_or_else(err)?;
            let int: i64 = int.parse().map_err(|_| err())?;
            let frac: i64 = frac.parse().map_err(|_| err())?;
            let numer = int
                .checked_mul(scale)
                .and_then(|v| v.checked_add(frac))
                .ok_or_else(err)?;
            Number::from_ratio(numer, scale).ok_or_else(err)?
        } else if let Some((numer, denom)) = body.split_once('/') {
            if !all_digits(numer) || !all_digits(denom) {
                return Err(err());
            }
            let numer: i64 = numer.parse().map_err(|_| err())?;
            let denom: i64 = denom.parse().map_err(|_| err())?;
            Number::from_ratio(numer, denom).ok_or_else(err)?
        } else {
            if !all_digits(body) {
                return Err(err());
            }
            Number::from_int(body.parse().map_err(|_| err())?)
        };
        if negative {
            Number::from_int(0).checked_sub(&value).ok_or_else(err)
        } else {
            Ok(value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimals_are_exact() {
        let n: Number = "2.5".parse().unwrap();
        assert_eq!(n, Number::from_ratio(5, 2).unwrap());
        assert_eq!(n.to_string(), "2.5");
        assert_eq!("0.10".parse::<Number>().unwrap().to_string(), "0.1");
        assert_eq!("-0.05".parse::<Number>().unwrap().to_string(), "-0.05");
    }

    #[test]
    fn non_terminating_prints_as_ratio() {
        let third = Number::from_int(1).checked_div(&Number::from_int(3)).unwrap();
        assert_eq!(third.to_string(), "1/3");
        assert_eq!("1/3".parse::<Number>().unwrap(), third);
        assert_eq!("-2/6".parse::<Number>().unwrap().to_string(), "-1/3");
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "-", "1.", ".5", "1/0", "1e3", "--1", "1.2.3", "99999999999999999999"] {
            assert!(bad.parse::<Number>().is_err(), "{bad}");
        }
    }

    #[test]
    fn division_by_zero_is_none() {
        assert!(Number::from_int(1).checked_div(&Number::from_int(0)).is_none());
    }

    #[test]
    fn integer_and_decimal_compare_exactly() {
        assert_eq!("2.0".parse::<Number>().unwrap(), Number::from_int(2));
        assert!(Number::from_ratio(39, 2).unwrap() < Number::from_int(20));
    }

    proptest! {
        #[test]
        fn display_round_trips(numer in -1_000_000i64..1_000_000, denom in 1i64..10_000) {
            let n = Number::from_ratio(numer, denom).unwrap();
            prop_assert_eq!(n.to_string().parse::<Number>().unwrap(), n);
        }
    }
}
