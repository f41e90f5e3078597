//! Exact rational weights and benefits.
//!
//! All comparisons in the dynamics are exact; the `>=` in weight domination
//! is taken literally, with no epsilon.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational value used for coalition weights, edge benefits and
/// friendship coefficients.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Weight(Rational64);

impl Weight {
    pub fn new(numer: i64, denom: i64) -> Self {
        Weight(Rational64::new(numer, denom))
    }

    pub fn from_int(n: i64) -> Self {
        Weight(Rational64::from_integer(n))
    }

    pub fn zero() -> Self {
        Weight(Rational64::zero())
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0)
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, rhs: Weight) -> Weight {
        Weight(self.0 - rhs.0)
    }
}

impl Mul for Weight {
    type Output = Weight;
    fn mul(self, rhs: Weight) -> Weight {
        Weight(self.0 * rhs.0)
    }
}

impl std::iter::Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::zero(), |a, b| a + b)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom() == &1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid rational literal {0:?}: expected \"p/q\", an integer, or a decimal string")]
pub struct ParseWeightError(String);

impl FromStr for Weight {
    type Err = ParseWeightError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseWeightError(s.to_owned());
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let numer: i64 = p.trim().parse().map_err(|_| bad())?;
            let denom: i64 = q.trim().parse().map_err(|_| bad())?;
            if denom == 0 {
                return Err(bad());
            }
            return Ok(Weight::new(numer, denom));
        }
        if let Some((int, frac)) = s.split_once('.') {
            let negative = int.trim_start().starts_with('-');
            let int_part: i64 = if int.is_empty() || int == "-" {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let scale = 10i64
                .checked_pow(frac.len() as u32)
                .ok_or_else(bad)?;
            let frac_part: i64 = frac.parse().map_err(|_| bad())?;
            let numer = int_part
                .checked_mul(scale)
                .and_then(|v| {
                    if negative {
                        v.checked_sub(frac_part)
                    } else {
                        v.checked_add(frac_part)
                    }
                })
                .ok_or_else(bad)?;
            return Ok(Weight::new(numer, scale));
        }
        let n: i64 = s.parse().map_err(|_| bad())?;
        Ok(Weight::from_int(n))
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(n) => Ok(Weight::from_int(n)),
            Repr::Text(s) => s.parse().map_err(D::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!("3/2".parse::<Weight>().unwrap(), Weight::new(3, 2));
        assert_eq!("7".parse::<Weight>().unwrap(), Weight::from_int(7));
        assert_eq!("2.5".parse::<Weight>().unwrap(), Weight::new(5, 2));
        assert_eq!("-0.25".parse::<Weight>().unwrap(), Weight::new(-1, 4));
        assert!("1/0".parse::<Weight>().is_err());
        assert!("x".parse::<Weight>().is_err());
    }

    #[test]
    fn display_reduces_and_round_trips() {
        let w = Weight::new(6, 4);
        assert_eq!(w.to_string(), "3/2");
        assert_eq!(w.to_string().parse::<Weight>().unwrap(), w);
        assert_eq!(Weight::from_int(4).to_string(), "4");
    }

    #[test]
    fn json_round_trip() {
        let w = Weight::new(7, 3);
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, "\"7/3\"");
        assert_eq!(serde_json::from_str::<Weight>(&s).unwrap(), w);
        assert_eq!(serde_json::from_str::<Weight>("5").unwrap(), Weight::from_int(5));
    }
}
