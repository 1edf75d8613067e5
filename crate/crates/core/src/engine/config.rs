use serde::{Deserialize, Serialize};

use crate::model::{Money, Rate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config value for {field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn cfg_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        message: message.into(),
    }
}

/// Trading rules shared by every back-test.
///
/// Thresholds are on the signed `[-1, 1]` scale: a stock is a buy candidate
/// when its factor is strictly above `buy_threshold` and a held stock is a
/// sell candidate when its factor is at or below `sell_threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub max_buys_per_day: usize,
    pub max_sells_per_day: usize,
    /// One-sided turnover cap as a fraction of opening NAV.
    pub turnover_cap: f64,
    /// Charged on both sides, as a fraction of transaction value.
    pub fee_rate: f64,
    pub buy_threshold: f64,
    pub sell_threshold: f64,
    pub initial_cash: Money,
    pub lot_size: u64,
    pub group_count: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            max_buys_per_day: 500,
            max_sells_per_day: 500,
            turnover_cap: 1.0,
            fee_rate: 0.0015,
            buy_threshold: 0.0,
            sell_threshold: 0.0,
            initial_cash: Money::from_units(10_000_000),
            lot_size: 100,
            group_count: 3,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.fee_rate > 0.0 && self.fee_rate < 1.0) {
            return Err(cfg_err("fee_rate", format!("must be in (0, 1), got {}", self.fee_rate)));
        }
        if !(self.turnover_cap > 0.0 && self.turnover_cap <= 1.0) {
            return Err(cfg_err(
                "turnover_cap",
                format!("must be in (0, 1], got {}", self.turnover_cap),
            ));
        }
        for (field, v) in [("buy_threshold", self.buy_threshold), ("sell_threshold", self.sell_threshold)] {
            if !v.is_finite() {
                return Err(cfg_err(field, "must be finite"));
            }
        }
        if self.buy_threshold < self.sell_threshold {
            return Err(cfg_err(
                "buy_threshold",
                format!(
                    "must be >= sell_threshold ({} < {})",
                    self.buy_threshold, self.sell_threshold
                ),
            ));
        }
        if self.lot_size == 0 {
            return Err(cfg_err("lot_size", "must be at least 1"));
        }
        if self.group_count < 2 {
            return Err(cfg_err("group_count", "must be at least 2"));
        }
        if self.initial_cash <= Money::ZERO {
            return Err(cfg_err("initial_cash", "must be positive"));
        }
        self.fee()?;
        self.cap()?;
        Ok(())
    }

    pub(crate) fn fee(&self) -> Result<Rate, ConfigError> {
        Rate::from_f64(self.fee_rate).map_err(|e| cfg_err("fee_rate", e.to_string()))
    }

    pub(crate) fn cap(&self) -> Result<Rate, ConfigError> {
        Rate::from_f64(self.turnover_cap).map_err(|e| cfg_err("turnover_cap", e.to_string()))
    }
}
