use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

const BEIJING_OFFSET_SECS: i32 = 8 * 3600;

fn beijing() -> FixedOffset {
    FixedOffset::east_opt(BEIJING_OFFSET_SECS).expect("valid offset")
}

/// Market open in exchange-local time.
pub fn market_open() -> NaiveTime {
    NaiveTime::from_hms_opt(9, 30, 0).expect("valid time")
}

/// A news timestamp in Beijing time (UTC+8) with minute precision.
///
/// Inputs in other offsets are converted to UTC+8; seconds are truncated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MarketTimestamp {
    date: NaiveDate,
    time: NaiveTime,
}

impl MarketTimestamp {
    pub fn new(date: NaiveDate, hour: u32, minute: u32) -> Result<Self, ModelError> {
        let time = NaiveTime::from_hms_opt(hour, minute, 0)
            .ok_or_else(|| ModelError::InvalidTimestamp(format!("{date} {hour}:{minute}")))?;
        Ok(MarketTimestamp { date, time })
    }

    fn from_local(local: NaiveDateTime) -> Self {
        let time = local.time();
        let time = NaiveTime::from_hms_opt(time.hour(), time.minute(), 0).expect("valid time");
        MarketTimestamp { date: local.date(), time }
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn time(&self) -> NaiveTime {
        self.time
    }

    /// True iff the item was stamped strictly before the 09:30 open.
    pub fn is_pre_open(&self) -> bool {
        self.time < market_open()
    }
}

pub fn is_pre_open(ts: &MarketTimestamp) -> bool {
    ts.is_pre_open()
}

impl FromStr for MarketTimestamp {
    type Err = ModelError;

    /// Accepts RFC 3339 with any offset, or a naive `YYYY-MM-DD[T ]HH:MM[:SS]`
    /// read as Beijing time.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Self::from_local(dt.with_timezone(&beijing()).naive_local()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Self::from_local(naive));
            }
        }
        Err(ModelError::InvalidTimestamp(s.to_string()))
    }
}

impl fmt::Display for MarketTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}T{}+08:00", self.date.format("%Y-%m-%d"), self.time.format("%H:%M:%S"))
    }
}

impl Serialize for MarketTimestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MarketTimestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses an ISO-8601 calendar date (`2022-03-15`).
pub fn parse_date(raw: &str) -> Result<NaiveDate, ModelError> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|_| ModelError::InvalidDate(raw.to_string()))
}

/// Strictly increasing list of trading dates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self, ModelError> {
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(ModelError::CalendarNotIncreasing(w[1]));
        }
        Ok(TradingCalendar { dates })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.binary_search(&date).is_ok()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.dates.iter().copied()
    }
}
