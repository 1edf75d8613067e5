use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Listing exchange. `Sse` sorts before `Szse`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exchange {
    Sse,
    Szse,
}

impl Exchange {
    pub fn as_str(self) -> &'static str {
        match self {
            Exchange::Sse => "SSE",
            Exchange::Szse => "SZSE",
        }
    }
}

impl FromStr for Exchange {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SSE" | "SH" => Ok(Exchange::Sse),
            "SZSE" | "SZ" => Ok(Exchange::Szse),
            _ => Err(ModelError::MalformedStockId {
                raw: s.to_string(),
                field: "exchange",
            }),
        }
    }
}

impl fmt::Display for Exchange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A listed A-share, ordered by exchange and then by code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StockId {
    exchange: Exchange,
    code: [u8; 6],
}

impl StockId {
    pub fn new(exchange: Exchange, code: &str) -> Result<Self, ModelError> {
        let bytes = code.as_bytes();
        if bytes.len() != 6 || !bytes.iter().all(u8::is_ascii_digit) {
            return Err(ModelError::MalformedStockId {
                raw: code.to_string(),
                field: "code",
            });
        }
        let mut buf = [0u8; 6];
        buf.copy_from_slice(bytes);
        Ok(StockId { exchange, code: buf })
    }

    pub fn exchange(&self) -> Exchange {
        self.exchange
    }

    pub fn code(&self) -> &str {
        // Constructed from ASCII digits only.
        std::str::from_utf8(&self.code).expect("ascii code")
    }
}

/// Parses the canonical `EXCHANGE:CODE` form, e.g. `SSE:600519`.
pub fn parse_stock_id(raw: &str) -> Result<StockId, ModelError> {
    let (exchange, code) = raw.trim().split_once(':').ok_or_else(|| ModelError::MalformedStockId {
        raw: raw.to_string(),
        field: "exchange",
    })?;
    let exchange = exchange.parse::<Exchange>().map_err(|_| ModelError::MalformedStockId {
        raw: raw.to_string(),
        field: "exchange",
    })?;
    StockId::new(exchange, code).map_err(|_| ModelError::MalformedStockId {
        raw: raw.to_string(),
        field: "code",
    })
}

impl FromStr for StockId {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_stock_id(s)
    }
}

impl fmt::Display for StockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.exchange, self.code())
    }
}

impl fmt::Debug for StockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StockId({self})")
    }
}

impl Serialize for StockId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StockId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}
