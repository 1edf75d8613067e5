//! Day-by-day portfolio simulator.
//!
//! Each trading day, at the open:
//! 1. held stocks whose factor is at or below the sell threshold are sold,
//!    worst first, up to the daily sell cap;
//! 2. unheld stocks whose factor is above the buy threshold are bought,
//!    best first, up to the daily buy cap, splitting the post-sale cash
//!    equally and flooring to whole lots with the fee reserved;
//! 3. the buy tail is dropped until one-sided turnover fits under the cap.
//!
//! All fills happen at the 09:30-09:35 VWAP and pay the fee on both sides.
//! The portfolio is marked at the close. Cash and positions are fixed-point,
//! so `nav_close = nav_open + valuation P&L - fees` holds exactly.

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use config::{BacktestConfig, ConfigError};

use crate::factor::{rank_daily, DailyRanking, FactorPanel};
use crate::ingest::PriceDataset;
use crate::model::{div_round_half_even, DailyPriceRecord, Money, OpeningPrints, Price, Rate, StockId, WindowTrade, RATE_SCALE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("no volume in the opening window")]
    NoLiquidity,
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("on {date}: {source}")]
    Step {
        date: NaiveDate,
        #[source]
        source: Box<EngineError>,
    },
}

/// Volume-weighted average price of the opening window, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vwap {
    notional_ticks: i128,
    volume: u128,
}

impl Vwap {
    pub fn value(&self) -> f64 {
        (self.notional_ticks as f64 / self.volume as f64) / crate::model::MONEY_SCALE as f64
    }

    /// The VWAP rounded half-to-even onto the price tick grid.
    pub fn fill_price(&self) -> Price {
        let ticks = div_round_half_even(self.notional_ticks, self.volume as i128);
        Price::from_ticks(ticks.max(1) as i64).expect("positive")
    }
}

/// `sum(price * volume) / sum(volume)` over the window.
pub fn compute_vwap(window: &[WindowTrade]) -> Result<Vwap, EngineError> {
    let mut notional_ticks: i128 = 0;
    let mut volume: u128 = 0;
    for t in window {
        notional_ticks += t.price.ticks() as i128 * t.volume as i128;
        volume += t.volume as u128;
    }
    if volume == 0 {
        return Err(EngineError::NoLiquidity);
    }
    Ok(Vwap { notional_ticks, volume })
}

/// Opening fill price for a record, or `None` when the stock cannot trade.
pub fn opening_fill(rec: &DailyPriceRecord) -> Option<Price> {
    if !rec.tradable {
        return None;
    }
    match &rec.opening {
        OpeningPrints::Vwap(p) => Some(*p),
        OpeningPrints::Window(w) => compute_vwap(w).ok().map(|v| v.fill_price()),
    }
}

/// Market data visible on one trading day.
#[derive(Debug, Clone, Copy)]
pub struct DayMarket<'a> {
    pub date: NaiveDate,
    pub prices: &'a BTreeMap<StockId, DailyPriceRecord>,
    pub benchmark_return: f64,
}

impl<'a> DayMarket<'a> {
    pub fn from_dataset(prices: &'a PriceDataset, date: NaiveDate) -> Option<Self> {
        Some(DayMarket {
            date,
            prices: prices.day(date)?,
            benchmark_return: prices.benchmark_return(date)?,
        })
    }

    pub fn fill(&self, stock: StockId) -> Option<Price> {
        self.prices.get(&stock).and_then(opening_fill)
    }

    pub fn close(&self, stock: StockId) -> Option<Price> {
        self.prices.get(&stock).map(|r| r.close)
    }
}

/// Cash and positions. `marks` holds the last close of each position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub date: Option<NaiveDate>,
    pub cash: Money,
    pub holdings: BTreeMap<StockId, u64>,
    pub marks: BTreeMap<StockId, Price>,
}

impl PortfolioState {
    pub fn initial(cash: Money) -> Self {
        PortfolioState {
            date: None,
            cash,
            holdings: BTreeMap::new(),
            marks: BTreeMap::new(),
        }
    }

    /// Same portfolio, positioned at the open of `date`.
    pub fn at(mut self, date: NaiveDate) -> Self {
        self.date = Some(date);
        self
    }

    /// Cash plus every position at its mark.
    pub fn nav(&self) -> Money {
        self.cash
            + self
                .holdings
                .iter()
                .map(|(s, n)| self.marks[s].value_of(*n))
                .sum::<Money>()
    }

    pub fn held(&self) -> BTreeSet<StockId> {
        self.holdings.keys().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub date: NaiveDate,
    pub stock: StockId,
    pub side: Side,
    pub shares: u64,
    pub fill_price: Price,
    pub gross_value: Money,
    pub fee: Money,
}

impl Trade {
    fn new(date: NaiveDate, stock: StockId, side: Side, shares: u64, fill_price: Price, fee_rate: Rate) -> Self {
        let gross_value = fill_price.value_of(shares);
        Trade {
            date,
            stock,
            side,
            shares,
            fill_price,
            gross_value,
            fee: gross_value.mul_rate(fee_rate),
        }
    }
}

/// Candidates for one open, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TradeSelection {
    pub sells: Vec<StockId>,
    pub buys: Vec<StockId>,
}

/// Picks sell and buy candidates from the day's ranking.
pub fn select_trades(
    state: &PortfolioState,
    ranking: &DailyRanking,
    market: &DayMarket<'_>,
    cfg: &BacktestConfig,
) -> TradeSelection {
    let signed = |v: f64| ranking.scale.to_signed_value(v);
    let sells = ranking
        .entries
        .iter()
        .rev()
        .filter(|(s, v)| state.holdings.contains_key(s) && signed(*v) <= cfg.sell_threshold)
        .filter(|(s, _)| market.fill(*s).is_some())
        .map(|(s, _)| *s)
        .take(cfg.max_sells_per_day)
        .collect();
    let buys = ranking
        .entries
        .iter()
        .filter(|(s, v)| !state.holdings.contains_key(s) && signed(*v) > cfg.buy_threshold)
        .filter(|(s, _)| market.fill(*s).is_some())
        .map(|(s, _)| *s)
        .take(cfg.max_buys_per_day)
        .collect();
    TradeSelection { sells, buys }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayDiagnostics {
    pub sell_candidates: usize,
    pub buy_candidates: usize,
    /// Buys whose equal share of cash did not cover one lot plus fee.
    pub buys_below_one_lot: usize,
    /// Buys dropped from the tail to respect the turnover cap.
    pub buys_cut_by_turnover_cap: usize,
    /// Sells dropped from the tail because sales alone broke the cap.
    pub sells_cut_by_turnover_cap: usize,
}

/// Orders sized for execution: sells first, then buys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizedOrders {
    pub trades: Vec<Trade>,
    pub diagnostics: DayDiagnostics,
}

/// Whether `(buy + sell) / 2 <= cap * nav`, evaluated exactly.
fn within_cap(traded: Money, cap: Rate, nav_open: Money) -> bool {
    traded.ticks() as i128 * RATE_SCALE as i128 <= 2 * cap.units() as i128 * nav_open.ticks() as i128
}

/// Largest whole-lot share count whose cost plus fee fits in `budget`.
pub fn max_affordable_shares(budget: Money, price: Price, lot: u64, fee: Rate) -> u64 {
    if budget <= Money::ZERO {
        return 0;
    }
    let cost = |lots: u64| {
        let gross = price.value_of(lots * lot);
        gross + gross.mul_rate(fee)
    };
    let lot_value = price.ticks() as i128 * lot as i128;
    let denom = lot_value * (RATE_SCALE as i128 + fee.units() as i128);
    let mut lots = (budget.ticks() as i128 * RATE_SCALE as i128 / denom) as u64;
    while cost(lots + 1) <= budget {
        lots += 1;
    }
    while lots > 0 && cost(lots) > budget {
        lots -= 1;
    }
    lots * lot
}

/// Turns candidates into trades under the cash, lot and turnover rules.
pub fn size_orders(
    selection: &TradeSelection,
    state: &PortfolioState,
    market: &DayMarket<'_>,
    cfg: &BacktestConfig,
) -> Result<SizedOrders, EngineError> {
    let fee = cfg.fee()?;
    let cap = cfg.cap()?;
    let date = market.date;
    let nav_open = state.nav();
    let mut diagnostics = DayDiagnostics {
        sell_candidates: selection.sells.len(),
        buy_candidates: selection.buys.len(),
        ..DayDiagnostics::default()
    };
    let fill = |s: StockId| {
        market
            .fill(s)
            .ok_or_else(|| EngineError::ProtocolViolation(format!("{s} selected but not tradable on {date}")))
    };

    let mut sells = Vec::with_capacity(selection.sells.len());
    for &stock in &selection.sells {
        let shares = *state
            .holdings
            .get(&stock)
            .ok_or_else(|| EngineError::ProtocolViolation(format!("selling {stock} which is not held")))?;
        sells.push(Trade::new(date, stock, Side::Sell, shares, fill(stock)?, fee));
    }
    while !within_cap(sells.iter().map(|t| t.gross_value).sum(), cap, nav_open) {
        sells.pop();
        diagnostics.sells_cut_by_turnover_cap += 1;
    }
    let sell_gross: Money = sells.iter().map(|t| t.gross_value).sum();
    let cash_after_sells = state.cash + sells.iter().map(|t| t.gross_value - t.fee).sum::<Money>();

    let mut buys = Vec::with_capacity(selection.buys.len());
    if !selection.buys.is_empty() {
        let per_buy = Money::from_ticks(cash_after_sells.ticks().max(0) / selection.buys.len() as i64);
        for &stock in &selection.buys {
            let price = fill(stock)?;
            let shares = max_affordable_shares(per_buy, price, cfg.lot_size, fee);
            if shares == 0 {
                diagnostics.buys_below_one_lot += 1;
                continue;
            }
            buys.push(Trade::new(date, stock, Side::Buy, shares, price, fee));
        }
    }
    let mut buy_gross: Money = buys.iter().map(|t| t.gross_value).sum();
    while !buys.is_empty() && !within_cap(buy_gross + sell_gross, cap, nav_open) {
        let t = buys.pop().expect("non-empty");
        buy_gross -= t.gross_value;
        diagnostics.buys_cut_by_turnover_cap += 1;
    }

    sells.extend(buys);
    Ok(SizedOrders {
        trades: sells,
        diagnostics,
    })
}

/// Everything that happened on one trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyLedger {
    pub date: NaiveDate,
    pub trades: Vec<Trade>,
    pub nav_open: Money,
    pub nav_close: Money,
    pub cash_close: Money,
    /// `(buy gross + sell gross) / 2`.
    pub turnover_value: Money,
    pub benchmark_return: f64,
    /// Positions at the close.
    pub held: Vec<StockId>,
    pub diagnostics: DayDiagnostics,
}

impl DailyLedger {
    pub fn fees(&self) -> Money {
        self.trades.iter().map(|t| t.fee).sum()
    }

    pub fn buys(&self) -> impl Iterator<Item = &Trade> {
        self.trades.iter().filter(|t| t.side == Side::Buy)
    }

    pub fn sells(&self) -> impl Iterator<Item = &Trade> {
        self.trades.iter().filter(|t| t.side == Side::Sell)
    }
}

/// Runs one open-to-close cycle.
///
/// The state, ranking and market data must all be for the same date.
pub fn step_day(
    state: &PortfolioState,
    ranking: &DailyRanking,
    market: &DayMarket<'_>,
    cfg: &BacktestConfig,
) -> Result<(PortfolioState, DailyLedger), EngineError> {
    if state.date != Some(ranking.date) || ranking.date != market.date {
        return Err(EngineError::ProtocolViolation(format!(
            "state dated {}, ranking dated {}, prices dated {}",
            state.date.map_or_else(|| "-".to_string(), |d| d.to_string()),
            ranking.date,
            market.date
        )));
    }
    let nav_open = state.nav();
    let selection = select_trades(state, ranking, market, cfg);
    let sized = size_orders(&selection, state, market, cfg)?;

    let mut next = state.clone();
    let mut traded = Money::ZERO;
    for t in &sized.trades {
        traded += t.gross_value;
        match t.side {
            Side::Sell => {
                next.holdings.remove(&t.stock);
                next.cash += t.gross_value - t.fee;
            }
            Side::Buy => {
                *next.holdings.entry(t.stock).or_insert(0) += t.shares;
                next.cash -= t.gross_value + t.fee;
            }
        }
    }
    if next.cash.is_negative() {
        return Err(EngineError::ProtocolViolation(format!("cash went negative: {}", next.cash)));
    }
    let mut marks = BTreeMap::new();
    for stock in next.holdings.keys() {
        let mark = market
            .close(*stock)
            .or_else(|| state.marks.get(stock).copied())
            .ok_or_else(|| EngineError::ProtocolViolation(format!("no price to value {stock}")))?;
        marks.insert(*stock, mark);
    }
    next.marks = marks;

    let ledger = DailyLedger {
        date: market.date,
        trades: sized.trades,
        nav_open,
        nav_close: next.nav(),
        cash_close: next.cash,
        turnover_value: traded.half(),
        benchmark_return: market.benchmark_return,
        held: next.holdings.keys().copied().collect(),
        diagnostics: sized.diagnostics,
    };
    Ok((next, ledger))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRun {
    pub ledgers: Vec<DailyLedger>,
    pub final_state: PortfolioState,
}

/// Steps through every calendar date in order.
pub fn run_backtest(panel: &FactorPanel, prices: &PriceDataset, cfg: &BacktestConfig) -> Result<BacktestRun, EngineError> {
    cfg.validate()?;
    let calendar = prices.calendar();
    if let Some(date) = panel.dates().find(|d| !calendar.contains(*d)) {
        return Err(EngineError::ProtocolViolation(format!(
            "factor panel has values for non-trading date {date}"
        )));
    }
    let mut state = PortfolioState::initial(cfg.initial_cash);
    let mut ledgers = Vec::with_capacity(calendar.len());
    for date in calendar.iter() {
        let wrap = |e: EngineError| EngineError::Step {
            date,
            source: Box::new(e),
        };
        let market = DayMarket::from_dataset(prices, date)
            .ok_or_else(|| wrap(EngineError::ProtocolViolation("no market data".into())))?;
        let ranking = rank_daily(panel, date);
        let (next, ledger) = step_day(&state.at(date), &ranking, &market, cfg).map_err(wrap)?;
        state = next;
        ledgers.push(ledger);
    }
    Ok(BacktestRun {
        ledgers,
        final_state: state,
    })
}

/// Writes `date,stock_id,side,shares,fill_price,gross_value,fee`.
pub fn write_ledger_csv<W: Write>(ledgers: &[DailyLedger], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "stock_id", "side", "shares", "fill_price", "gross_value", "fee"])?;
    for t in ledgers.iter().flat_map(|l| &l.trades) {
        w.write_record([
            t.date.format("%Y-%m-%d").to_string(),
            t.stock.to_string(),
            t.side.as_str().to_string(),
            t.shares.to_string(),
            t.fill_price.to_string(),
            t.gross_value.to_string(),
            t.fee.to_string(),
        ])?;
    }
    w.flush()
}

/// Writes `date,nav_open,nav_close,benchmark_level`.
pub fn write_nav_csv<W: Write>(ledgers: &[DailyLedger], prices: &PriceDataset, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "nav_open", "nav_close", "benchmark_level"])?;
    for l in ledgers {
        w.write_record([
            l.date.format("%Y-%m-%d").to_string(),
            l.nav_open.to_string(),
            l.nav_close.to_string(),
            prices.benchmark_level(l.date).map(|v| format!("{v}")).unwrap_or_default(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests;
