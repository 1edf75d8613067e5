//! Brute-force reference simulator.
//!
//! Written from the trading rules alone with raw integer ticks: it does not
//! call the engine, the price dataset, or the crate's rounding helpers.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use sentibench_core::engine::BacktestConfig;
use sentibench_core::factor::FactorPanel;
use sentibench_core::model::{DailyPriceRecord, OpeningPrints, StockId, TradingCalendar};
use sentibench_core::sentiment::Scale;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefTrade {
    pub date: NaiveDate,
    pub stock: StockId,
    pub sell: bool,
    pub shares: u64,
    pub fill: i64,
    pub gross: i64,
    pub fee: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefDay {
    pub date: NaiveDate,
    pub trades: Vec<RefTrade>,
    pub nav_open: i64,
    pub nav_close: i64,
    pub cash: i64,
}

/// `num / den` rounded to nearest, ties to even, for `den > 0`.
fn round_ties_even(num: i128, den: i128) -> i128 {
    let mut q = num / den;
    let mut r = num % den;
    if r < 0 {
        q -= 1;
        r += den;
    }
    if 2 * r > den || (2 * r == den && q.rem_euclid(2) == 1) {
        q + 1
    } else {
        q
    }
}

fn ten_billionths(x: f64) -> i64 {
    (x * 1e10).round() as i64
}

fn fill_ticks(rec: &DailyPriceRecord) -> Option<i64> {
    if !rec.tradable {
        return None;
    }
    match &rec.opening {
        OpeningPrints::Vwap(p) => Some(p.ticks()),
        OpeningPrints::Window(w) => {
            let vol: i128 = w.iter().map(|t| t.volume as i128).sum();
            if vol == 0 {
                return None;
            }
            let value: i128 = w.iter().map(|t| t.price.ticks() as i128 * t.volume as i128).sum();
            Some(round_ties_even(value, vol) as i64)
        }
    }
}

pub fn simulate(
    calendar: &TradingCalendar,
    records: &[DailyPriceRecord],
    panel: &FactorPanel,
    cfg: &BacktestConfig,
) -> Vec<RefDay> {
    let fee_units = ten_billionths(cfg.fee_rate) as i128;
    let cap_units = ten_billionths(cfg.turnover_cap) as i128;
    let fee_of = |gross: i64| round_ties_even(gross as i128 * fee_units, 10_000_000_000) as i64;
    let signed = |v: f64| match panel.scale() {
        Scale::Signed => v,
        Scale::Unit => 2.0 * v - 1.0,
    };
    let mut cash: i64 = cfg.initial_cash.ticks();
    let mut held: BTreeMap<StockId, (u64, i64)> = BTreeMap::new();
    let mut days = Vec::new();
    for date in calendar.iter() {
        let today: BTreeMap<StockId, &DailyPriceRecord> =
            records.iter().filter(|r| r.date == date).map(|r| (r.stock, r)).collect();
        let fill = |s: &StockId| today.get(s).and_then(|r| fill_ticks(r));
        let nav_open: i64 = cash + held.values().map(|(n, m)| *n as i64 * m).sum::<i64>();

        let mut ranked: Vec<(StockId, f64)> = panel
            .iter()
            .filter(|(d, _, _)| *d == date)
            .map(|(_, s, v)| (s, v))
            .collect();
        // Insertion sort: best factor first, smaller id first on ties.
        for i in 1..ranked.len() {
            let mut j = i;
            while j > 0 {
                let (a, b) = (ranked[j - 1], ranked[j]);
                let before = b.1 > a.1 || (b.1 == a.1 && b.0 < a.0);
                if !before {
                    break;
                }
                ranked.swap(j - 1, j);
                j -= 1;
            }
        }

        let mut sells: Vec<RefTrade> = Vec::new();
        for (s, v) in ranked.iter().rev() {
            if sells.len() == cfg.max_sells_per_day {
                break;
            }
            if let (Some((n, _)), true, Some(px)) = (held.get(s), signed(*v) <= cfg.sell_threshold, fill(s)) {
                let gross = *n as i64 * px;
                sells.push(RefTrade {
                    date,
                    stock: *s,
                    sell: true,
                    shares: *n,
                    fill: px,
                    gross,
                    fee: fee_of(gross),
                });
            }
        }
        let limit = 2 * cap_units * nav_open as i128;
        while sells.iter().map(|t| t.gross as i128).sum::<i128>() * 10_000_000_000 > limit {
            sells.pop();
        }
        let sell_gross: i128 = sells.iter().map(|t| t.gross as i128).sum();
        let cash_after_sells = cash + sells.iter().map(|t| t.gross - t.fee).sum::<i64>();

        let mut candidates: Vec<(StockId, i64)> = Vec::new();
        for (s, v) in &ranked {
            if candidates.len() == cfg.max_buys_per_day {
                break;
            }
            if held.contains_key(s) || signed(*v) <= cfg.buy_threshold {
                continue;
            }
            if let Some(px) = fill(s) {
                candidates.push((*s, px));
            }
        }
        let mut buys: Vec<RefTrade> = Vec::new();
        if !candidates.is_empty() {
            let budget = cash_after_sells.max(0) / candidates.len() as i64;
            for (s, px) in candidates {
                let cost = |lots: u64| {
                    let gross = (lots * cfg.lot_size) as i64 * px;
                    gross + fee_of(gross)
                };
                let mut lots = 0;
                while cost(lots + 1) <= budget {
                    lots += 1;
                }
                if lots == 0 {
                    continue;
                }
                let shares = lots * cfg.lot_size;
                let gross = shares as i64 * px;
                buys.push(RefTrade {
                    date,
                    stock: s,
                    sell: false,
                    shares,
                    fill: px,
                    gross,
                    fee: fee_of(gross),
                });
            }
        }
        while !buys.is_empty()
            && (buys.iter().map(|t| t.gross as i128).sum::<i128>() + sell_gross) * 10_000_000_000 > limit
        {
            buys.pop();
        }

        for t in &sells {
            held.remove(&t.stock);
            cash += t.gross - t.fee;
        }
        for t in &buys {
            held.insert(t.stock, (t.shares, t.fill));
            cash -= t.gross + t.fee;
        }
        for (s, (_, mark)) in held.iter_mut() {
            if let Some(r) = today.get(s) {
                *mark = r.close.ticks();
            }
        }
        let nav_close = cash + held.values().map(|(n, m)| *n as i64 * m).sum::<i64>();
        let mut trades = sells;
        trades.extend(buys);
        days.push(RefDay {
            date,
            trades,
            nav_open,
            nav_close,
            cash,
        });
    }
    days
}
