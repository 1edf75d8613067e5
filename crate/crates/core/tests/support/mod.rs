//! Shared helpers for integration tests: a random case generator and an
//! independent brute-force simulator used as the engine's reference.
#![allow(dead_code)]

pub mod compare;
pub mod reference;

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};
use sentibench_core::engine::BacktestConfig;
use sentibench_core::factor::FactorPanel;
use sentibench_core::ingest::PriceDataset;
use sentibench_core::model::{
    DailyPriceRecord, Exchange, Money, OpeningPrints, Price, StockId, TradingCalendar, WindowTrade,
};
use sentibench_core::sentiment::{ProviderKind, Scale};

/// A self-contained back-test input.
#[derive(Debug, Clone)]
pub struct Case {
    pub calendar: TradingCalendar,
    pub records: Vec<DailyPriceRecord>,
    pub benchmark: BTreeMap<NaiveDate, f64>,
    pub panel: FactorPanel,
    pub cfg: BacktestConfig,
}

impl Case {
    pub fn prices(&self) -> PriceDataset {
        PriceDataset::new(self.calendar.clone(), self.records.clone(), self.benchmark.clone()).unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CaseShape {
    pub stocks: usize,
    pub days: usize,
    pub news_prob: f64,
    pub suspend_prob: f64,
    pub gap_prob: f64,
    /// Use the default trading rules instead of randomized ones.
    pub fixed_rules: bool,
}

impl CaseShape {
    pub fn small(stocks: usize, days: usize) -> Self {
        CaseShape {
            stocks,
            days,
            news_prob: 0.9,
            suspend_prob: 0.15,
            gap_prob: 0.1,
            fixed_rules: false,
        }
    }

    pub fn default_rules(stocks: usize, days: usize) -> Self {
        CaseShape {
            stocks,
            days,
            news_prob: 0.5,
            suspend_prob: 0.03,
            gap_prob: 0.02,
            fixed_rules: true,
        }
    }
}

pub fn stock(i: usize) -> StockId {
    let (ex, code) = if i.is_multiple_of(3) {
        (Exchange::Szse, format!("{:06}", 1 + i))
    } else {
        (Exchange::Sse, format!("{:06}", 600_000 + i))
    };
    StockId::new(ex, &code).unwrap()
}

pub fn trading_days(n: usize) -> Vec<NaiveDate> {
    NaiveDate::from_ymd_opt(2021, 1, 4)
        .unwrap()
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

fn price(ticks: i64) -> Price {
    Price::from_ticks(ticks.max(1)).unwrap()
}

/// Random case with prices on a 0.01 grid and occasional odd ticks.
pub fn random_case<R: RngCore>(rng: &mut R, shape: CaseShape) -> Case {
    let dates = trading_days(shape.days);
    let calendar = TradingCalendar::new(dates.clone()).unwrap();
    let unit_scale = !shape.fixed_rules && rng.random_bool(0.3);
    let scale = if unit_scale { Scale::Unit } else { Scale::Signed };
    let provider = if unit_scale {
        ProviderKind::ContinuousPositiveProb
    } else {
        ProviderKind::DiscreteThreeClass
    };
    let mut panel = FactorPanel::empty(provider, scale);
    let mut records = Vec::new();
    let mut benchmark = BTreeMap::new();
    let mut level = 3000.0 + rng.random_range(0.0..2000.0);
    let discrete = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.0 / 3.0, -2.0 / 3.0];
    for i in 0..shape.stocks {
        let s = stock(i);
        let mut close: i64 = rng.random_range(1_000..600_000);
        let start = if rng.random_bool(0.2) { rng.random_range(0..shape.days) } else { 0 };
        for (di, &date) in dates.iter().enumerate() {
            if rng.random_bool(shape.news_prob) {
                let v = if unit_scale {
                    rng.random_range(0.0..=1.0)
                } else if rng.random_bool(0.5) {
                    *discrete.choose(rng).unwrap()
                } else {
                    rng.random_range(-1.0..=1.0)
                };
                panel.insert(s, date, v).unwrap();
            }
            if di < start || (di > start && rng.random_bool(shape.gap_prob)) {
                continue;
            }
            let tradable = !rng.random_bool(shape.suspend_prob);
            let step = |c: i64, rng: &mut R| {
                let t = (c as f64 * (1.0 + rng.random_range(-0.08..0.08))) as i64;
                if rng.random_bool(0.8) {
                    (t / 100) * 100
                } else {
                    t
                }
            };
            let open = price(step(close, rng)).ticks();
            close = price(step(close, rng)).ticks();
            let opening = if rng.random_bool(0.5) {
                OpeningPrints::Vwap(price(open))
            } else {
                let n = rng.random_range(1..=5);
                let mut w: Vec<WindowTrade> = (0..n)
                    .map(|_| WindowTrade {
                        price: price(step(open, rng)),
                        volume: if rng.random_bool(0.2) { 0 } else { rng.random_range(1..50_000) },
                    })
                    .collect();
                if tradable && w.iter().all(|t| t.volume == 0) {
                    w[0].volume = 100;
                }
                OpeningPrints::Window(w)
            };
            records.push(DailyPriceRecord {
                stock: s,
                date,
                opening,
                close: price(close),
                tradable,
            });
        }
    }
    for &date in &dates {
        level *= 1.0 + rng.random_range(-0.03..0.03);
        benchmark.insert(date, level);
    }
    let cfg = if shape.fixed_rules {
        BacktestConfig {
            initial_cash: Money::from_units(rng.random_range(100_000..50_000_000)),
            ..BacktestConfig::default()
        }
    } else {
        let sell: f64 = *[-0.5, 0.0, 0.0, 0.25, 0.5].choose(rng).unwrap();
        let buy = sell + *[0.0, 0.0, 0.25, 0.5].choose(rng).unwrap();
        BacktestConfig {
            max_buys_per_day: rng.random_range(0..=5),
            max_sells_per_day: rng.random_range(0..=5),
            turnover_cap: *[1.0, 1.0, 1.0, 0.8, 0.6, 0.5, 0.3, 0.05].choose(rng).unwrap(),
            fee_rate: *[0.0015, 0.0015, 0.001, 0.003, 0.0001].choose(rng).unwrap(),
            buy_threshold: buy,
            sell_threshold: sell,
            initial_cash: Money::from_ticks(rng.random_range(1_000_000_000..20_000_000_000)),
            lot_size: *[100, 100, 1, 10, 200].choose(rng).unwrap(),
            group_count: 3,
        }
    };
    Case {
        calendar,
        records,
        benchmark,
        panel,
        cfg,
    }
}
