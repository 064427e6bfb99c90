//! Fixed-point currency.
//!
//! Prices are integer micro-dollars per 1,000 tokens, so the cost of `n`
//! tokens is exactly `n * price` nano-dollars. Sums never touch floating point.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount `{input}`: {reason}")]
pub struct AmountError {
    pub input: String,
    pub reason: &'static str,
}

/// Parses a non-negative decimal with at most `scale` fractional digits
/// into an integer count of `10^-scale` units.
fn parse_fixed(input: &str, scale: u32) -> Result<u64, AmountError> {
    let err = |reason| AmountError {
        input: input.to_string(),
        reason,
    };
    let s = input.trim().trim_start_matches('$');
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err("empty"));
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("not a non-negative decimal"));
    }
    if frac.len() > scale as usize {
        return Err(err("too many decimal places"));
    }
    let unit = 10u64.pow(scale);
    let whole: u64 = if whole.is_empty() {
        0
    } else {
        whole.parse().map_err(|_| err("out of range"))?
    };
    let frac_val: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse::<u64>().map_err(|_| err("out of range"))? * 10u64.pow(scale - frac.len() as u32)
    };
    whole
        .checked_mul(unit)
        .and_then(|w| w.checked_add(frac_val))
        .ok_or_else(|| err("out of range"))
}

fn format_fixed(units: u64, scale: u32, min_frac: usize) -> String {
    let unit = 10u64.pow(scale);
    let whole = units / unit;
    let frac = format!("{:0width$}", units % unit, width = scale as usize);
    let trimmed = frac.trim_end_matches('0');
    let frac = if trimmed.len() < min_frac {
        &frac[..min_frac]
    } else {
        trimmed
    };
    if frac.is_empty() {
        whole.to_string()
    } else {
        format!("{whole}.{frac}")
    }
}

/// An exact amount of US dollars, stored in nano-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money {
    nanos: u64,
}

impl Money {
    pub const ZERO: Money = Money { nanos: 0 };

    pub fn from_nanos(nanos: u64) -> Money {
        Money { nanos }
    }

    pub fn nanos(self) -> u64 {
        self.nanos
    }

    pub fn from_dollars(s: &str) -> Result<Money, AmountError> {
        parse_fixed(s, 9).map(Money::from_nanos)
    }

    /// Dollar amount as a decimal string with at least two decimals.
    pub fn to_dollars_string(self) -> String {
        format_fixed(self.nanos, 9, 2)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money::from_nanos(self.nanos + rhs.nanos)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.nanos += rhs.nanos;
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.to_dollars_string())
    }
}

impl FromStr for Money {
    type Err = AmountError;
    fn from_str(s: &str) -> Result<Money, AmountError> {
        Money::from_dollars(s)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_dollars_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Money, D::Error> {
        let s = decimal_text(d)?;
        Money::from_dollars(&s).map_err(de::Error::custom)
    }
}

/// Price of 1,000 tokens, in micro-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price {
    micros_per_1k: u64,
}

impl Price {
    pub fn from_micros_per_1k(micros_per_1k: u64) -> Price {
        Price { micros_per_1k }
    }

    pub fn per_1k_dollars(s: &str) -> Result<Price, AmountError> {
        parse_fixed(s, 6).map(Price::from_micros_per_1k)
    }

    /// Exact cost of `tokens` tokens.
    pub fn cost(self, tokens: u64) -> Money {
        Money::from_nanos(tokens * self.micros_per_1k)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}/1K", format_fixed(self.micros_per_1k, 6, 0))
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_fixed(self.micros_per_1k, 6, 0))
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Price, D::Error> {
        let s = decimal_text(d)?;
        Price::per_1k_dollars(&s).map_err(de::Error::custom)
    }
}

/// Accepts either a decimal string or a number. Numbers go through their
/// shortest round-trip representation, so `0.01` stays `0.01`.
fn decimal_text<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Text {
        S(String),
        I(u64),
        F(f64),
    }
    Ok(match Text::deserialize(d)? {
        Text::S(s) => s,
        Text::I(i) => i.to_string(),
        Text::F(f) => format!("{f}"),
    })
}
