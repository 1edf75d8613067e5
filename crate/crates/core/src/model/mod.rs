//! Shared domain types: identifiers, market time, fixed-point money and the
//! raw news and price records every other module consumes.

mod money;
mod stock;
mod time;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use money::{div_round_half_even, Money, Price, Rate, MONEY_SCALE, RATE_SCALE};
pub use stock::{parse_stock_id, Exchange, StockId};
pub use time::{is_pre_open, market_open, parse_date, MarketTimestamp, TradingCalendar};

use crate::sentiment::ProviderKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("malformed stock id {raw:?}: bad {field}")]
    MalformedStockId { raw: String, field: &'static str },
    #[error("invalid timestamp {0:?}")]
    InvalidTimestamp(String),
    #[error("invalid date {0:?}")]
    InvalidDate(String),
    #[error("invalid decimal {0:?}")]
    InvalidDecimal(String),
    #[error("price must be positive, got {0}")]
    NonPositivePrice(f64),
    #[error("trading calendar not strictly increasing at {0}")]
    CalendarNotIncreasing(NaiveDate),
    #[error("window trades for {0} carry no volume on a tradable day")]
    EmptyWindow(StockId),
}

/// What a news row carries: the text to be scored, or a score already
/// produced by some provider.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewsPayload {
    Text(String),
    Score {
        value: f64,
        provider: Option<ProviderKind>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewsRecord {
    pub news_id: String,
    pub stock: StockId,
    pub timestamp: MarketTimestamp,
    pub source: String,
    pub payload: NewsPayload,
}

/// One print inside the 09:30-09:35 window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowTrade {
    pub price: Price,
    pub volume: u64,
}

/// How the opening fill price is known for a stock-day.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpeningPrints {
    Window(Vec<WindowTrade>),
    Vwap(Price),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyPriceRecord {
    pub stock: StockId,
    pub date: NaiveDate,
    pub opening: OpeningPrints,
    pub close: Price,
    pub tradable: bool,
}

impl DailyPriceRecord {
    /// Checks the window-volume invariant for tradable days.
    pub fn validate(&self) -> Result<(), ModelError> {
        if let (true, OpeningPrints::Window(trades)) = (self.tradable, &self.opening) {
            if !trades.iter().any(|t| t.volume > 0) {
                return Err(ModelError::EmptyWindow(self.stock));
            }
        }
        Ok(())
    }
}
