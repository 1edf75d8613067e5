//! Fixed-point money, prices and rates.
//!
//! Amounts and prices are stored as integer ticks of 1/10_000 CNY. Rates
//! (fees, turnover caps) are stored in units of 1e-10 so that any decimal
//! fraction with up to ten digits is represented exactly. Every operation
//! that cannot stay exact rounds half-to-even back onto the tick grid.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Ticks per currency unit.
pub const MONEY_SCALE: i64 = 10_000;
/// Units per 1.0 of a [`Rate`].
pub const RATE_SCALE: i64 = 10_000_000_000;

/// Integer division of `num / den` rounded half-to-even. `den` must be positive.
pub fn div_round_half_even(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q % 2 == 0 {
                q
            } else {
                q + 1
            }
        }
    }
}

/// Parses a plain decimal literal into an integer count of `1 / 10^digits`
/// units, rounding half-to-even when the literal carries more digits.
pub(crate) fn parse_scaled(raw: &str, digits: u32) -> Result<i128, ModelError> {
    let bad = || ModelError::InvalidDecimal(raw.to_string());
    let s = raw.trim();
    let (neg, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    if int_part.len() > 24 || frac_part.len() > 24 {
        return Err(bad());
    }
    let int_val: i128 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
    let frac_digits = frac_part.len() as u32;
    let frac_val: i128 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let scale = 10i128.pow(digits);
    let value = if frac_digits <= digits {
        int_val * scale + frac_val * 10i128.pow(digits - frac_digits)
    } else {
        let extra = 10i128.pow(frac_digits - digits);
        int_val * scale + div_round_half_even(frac_val, extra)
    };
    Ok(if neg { -value } else { value })
}

fn fmt_scaled(f: &mut fmt::Formatter<'_>, value: i128, digits: u32) -> fmt::Result {
    let scale = 10i128.pow(digits);
    let sign = if value < 0 { "-" } else { "" };
    let abs = value.abs();
    write!(f, "{sign}{}.{:0width$}", abs / scale, abs % scale, width = digits as usize)
}

/// A CNY amount with four fractional digits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_ticks(ticks: i64) -> Self {
        Money(ticks)
    }

    pub const fn ticks(self) -> i64 {
        self.0
    }

    /// Whole currency units, e.g. `Money::from_units(100_000)`.
    pub const fn from_units(units: i64) -> Self {
        Money(units * MONEY_SCALE)
    }

    /// Converts via the shortest decimal representation of `value`, so
    /// `from_f64(0.1)` is exactly 0.1000.
    pub fn from_f64(value: f64) -> Result<Self, ModelError> {
        if !value.is_finite() {
            return Err(ModelError::InvalidDecimal(value.to_string()));
        }
        format!("{value}").parse()
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MONEY_SCALE as f64
    }

    /// `self * rate`, rounded half-to-even onto the tick grid.
    pub fn mul_rate(self, rate: Rate) -> Money {
        let raw = div_round_half_even(self.0 as i128 * rate.0 as i128, RATE_SCALE as i128);
        Money(raw as i64)
    }

    /// `self / 2`, rounded half-to-even.
    pub fn half(self) -> Money {
        Money(div_round_half_even(self.0 as i128, 2) as i64)
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl FromStr for Money {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = parse_scaled(s, 4)?;
        i64::try_from(v).map(Money).map_err(|_| ModelError::InvalidDecimal(s.to_string()))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_scaled(f, self.0 as i128, 4)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

/// Sums left to right; integer addition makes the result independent of order.
impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

/// A per-share price in CNY with four fractional digits. Always positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(i64);

impl Price {
    pub fn from_ticks(ticks: i64) -> Result<Self, ModelError> {
        if ticks <= 0 {
            return Err(ModelError::NonPositivePrice(ticks as f64 / MONEY_SCALE as f64));
        }
        Ok(Price(ticks))
    }

    pub const fn ticks(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MONEY_SCALE as f64
    }

    /// Value of `shares` at this price. Exact.
    pub fn value_of(self, shares: u64) -> Money {
        Money(self.0 * shares as i64)
    }
}

impl FromStr for Price {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = parse_scaled(s, 4)?;
        if v <= 0 {
            return Err(ModelError::NonPositivePrice(s.trim().parse().unwrap_or(0.0)));
        }
        i64::try_from(v).map(Price).map_err(|_| ModelError::InvalidDecimal(s.to_string()))
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_scaled(f, self.0 as i128, 4)
    }
}

/// A dimensionless fraction such as a fee rate, with ten fractional digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(i64);

impl Rate {
    pub const ONE: Rate = Rate(RATE_SCALE);

    pub const fn from_units(units: i64) -> Self {
        Rate(units)
    }

    pub const fn units(self) -> i64 {
        self.0
    }

    pub fn from_f64(value: f64) -> Result<Self, ModelError> {
        if !value.is_finite() {
            return Err(ModelError::InvalidDecimal(value.to_string()));
        }
        format!("{value}").parse()
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / RATE_SCALE as f64
    }
}

impl FromStr for Rate {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v = parse_scaled(s, 10)?;
        i64::try_from(v).map(Rate).map_err(|_| ModelError::InvalidDecimal(s.to_string()))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum Repr {
                    Str(String),
                    Int(i64),
                    Float(f64),
                }
                let text = match Repr::deserialize(d)? {
                    Repr::Str(s) => s,
                    Repr::Int(i) => i.to_string(),
                    Repr::Float(f) => format!("{f}"),
                };
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Money);
string_serde!(Price);
