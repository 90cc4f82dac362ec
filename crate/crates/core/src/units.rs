//! Exact decimal microsecond quantities.
//!
//! Latency tables are summed and divided exactly, so values are held as
//! integer nanoseconds and parsed from decimal text without passing through
//! binary floating point.

use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid decimal {text:?}: {reason}")]
pub struct ParseDecimalError {
    pub text: String,
    pub reason: &'static str,
}

/// Parses a non-negative decimal into an integer scaled by `10^scale`.
pub(crate) fn parse_scaled(text: &str, scale: u32) -> Result<u64, ParseDecimalError> {
    let err = |reason| ParseDecimalError {
        text: text.to_string(),
        reason,
    };
    let t = text.trim().replace('_', "");
    if t.is_empty() {
        return Err(err("empty"));
    }
    if t.starts_with('-') {
        return Err(err("negative"));
    }
    let (int, frac) = t.split_once('.').unwrap_or((&t, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(err("no digits"));
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err("not a decimal number"));
    }
    let frac = frac.trim_end_matches('0');
    if frac.len() > scale as usize {
        return Err(err("too many decimal places"));
    }
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| err("out of range"))?
    };
    let mut frac_scaled: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().unwrap()
    };
    frac_scaled *= 10u64.pow(scale - frac.len() as u32);
    int.checked_mul(10u64.pow(scale))
        .and_then(|v| v.checked_add(frac_scaled))
        .ok_or_else(|| err("out of range"))
}

/// A non-negative microsecond quantity with nanosecond resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Micros(u64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub const fn from_ns(ns: u64) -> Self {
        Micros(ns)
    }

    pub const fn from_whole(us: u64) -> Self {
        Micros(us * 1000)
    }

    pub const fn as_ns(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// `floor(self / other)`; `None` when `other` is zero.
    pub fn ratio_floor(self, other: Micros) -> Option<u64> {
        self.0.checked_div(other.0)
    }
}

impl FromStr for Micros {
    type Err = ParseDecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_scaled(s, 3).map(Micros)
    }
}

/// Always three decimals, e.g. `5.000`.
impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

impl Add for Micros {
    type Output = Micros;

    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl Sum for Micros {
    fn sum<I: Iterator<Item = Micros>>(iter: I) -> Micros {
        iter.fold(Micros::ZERO, Add::add)
    }
}

impl Serialize for Micros {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Accepts a decimal string or a number; numbers are routed through their
/// shortest decimal text.
impl<'de> Deserialize<'de> for Micros {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Int(i) => return Ok(Micros::from_whole(i)),
            Raw::Float(f) => f.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!("0.7".parse::<Micros>().unwrap().as_ns(), 700);
        assert_eq!("2".parse::<Micros>().unwrap().as_ns(), 2000);
        assert_eq!("336750".parse::<Micros>().unwrap().as_ns(), 336_750_000);
        assert_eq!("200_000".parse::<Micros>().unwrap().as_ns(), 200_000_000);
        assert_eq!("1.150".parse::<Micros>().unwrap().as_ns(), 1150);
        assert_eq!(".5".parse::<Micros>().unwrap().as_ns(), 500);
        assert_eq!(Micros::from_ns(5000).to_string(), "5.000");
        assert_eq!(Micros::from_ns(1).to_string(), "0.001");
        assert!("1.0001".parse::<Micros>().is_err());
        assert!("-1".parse::<Micros>().is_err());
        assert!("abc".parse::<Micros>().is_err());
        assert!("".parse::<Micros>().is_err());
        assert!(".".parse::<Micros>().is_err());
    }

    #[test]
    fn exact_sums() {
        let s: Micros = ["0.7", "2.3", "2"]
            .iter()
            .map(|t| t.parse::<Micros>().unwrap())
            .sum();
        assert_eq!(s, Micros::from_whole(5));
        // 0.1 + 0.2 is exact here
        let s: Micros = ["0.1", "0.2"]
            .iter()
            .map(|t| t.parse::<Micros>().unwrap())
            .sum();
        assert_eq!(s.to_string(), "0.300");
    }

    #[test]
    fn serde_forms() {
        let v: Vec<Micros> = serde_json::from_str(r#"[5, 0.35, "1.15"]"#).unwrap();
        assert_eq!(
            v.iter().map(|m| m.as_ns()).collect::<Vec<_>>(),
            vec![5000, 350, 1150]
        );
        assert_eq!(serde_json::to_string(&v[1]).unwrap(), r#""0.350""#);
    }
}
