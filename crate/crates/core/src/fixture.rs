//! Seeded synthetic datasets with an optional planted sentiment signal.
//!
//! Every stock-day draws a latent sentiment `s ~ N(0, 1)`. News items about
//! the stock that day carry a positive-probability score increasing in `s`,
//! and the stock's close-to-close return is
//! `m_d + sigma * (rho * s + sqrt(1 - rho^2) * eps)`, where `m_d` is the
//! market move shared by all stocks and by the benchmark. The opening VWAP
//! sits close to the previous close, so the signal is earned after the open.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ingest::{IngestError, NewsDataset, PriceDataset};
use crate::model::{
    DailyPriceRecord, Exchange, MarketTimestamp, NewsPayload, NewsRecord, OpeningPrints, Price, StockId,
    TradingCalendar, WindowTrade,
};
use crate::sentiment::ProviderKind;

/// News sources and their weights in the generated corpus.
pub const SOURCES: [(&str, f64); 7] = [
    ("Hithink RoyalFlush", 59.57),
    ("Eastmoney", 33.65),
    ("Sina Finance", 4.88),
    ("Tencent", 1.55),
    ("Phoenix New Media", 0.23),
    ("Yicai", 0.1),
    ("Securities Times", 0.02),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub stocks: usize,
    pub days: usize,
    /// Correlation between the latent sentiment and the same-day return.
    pub plant_corr: f64,
    /// Chance that a stock has any news on a given day.
    pub news_prob: f64,
    /// Share of news items published after the open.
    pub post_open_share: f64,
    pub suspend_prob: f64,
    /// Chance that a price row is missing altogether.
    pub gap_prob: f64,
    pub daily_vol: f64,
    pub start: NaiveDate,
}

impl FixtureSpec {
    pub fn new(seed: u64, stocks: usize, days: usize, plant_corr: f64) -> Self {
        FixtureSpec {
            seed,
            stocks,
            days,
            plant_corr,
            news_prob: 0.5,
            post_open_share: 0.1,
            suspend_prob: 0.01,
            gap_prob: 0.005,
            daily_vol: 0.02,
            start: NaiveDate::from_ymd_opt(2022, 1, 4).expect("valid date"),
        }
    }

    fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: String| Err(FixtureError::InvalidSpec(m));
        if self.stocks == 0 || self.days == 0 {
            return bad(format!("sizes must be at least 1, got {} stocks x {} days", self.stocks, self.days));
        }
        if self.stocks > 99_999 {
            return bad(format!("at most 99999 stocks, got {}", self.stocks));
        }
        if !(-1.0..=1.0).contains(&self.plant_corr) {
            return bad(format!("plant_corr must be in [-1, 1], got {}", self.plant_corr));
        }
        for (name, p) in [
            ("news_prob", self.news_prob),
            ("post_open_share", self.post_open_share),
            ("suspend_prob", self.suspend_prob),
            ("gap_prob", self.gap_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(self.daily_vol >= 0.0 && self.daily_vol < 0.2) {
            return bad(format!("daily_vol must be in [0, 0.2), got {}", self.daily_vol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub calendar: TradingCalendar,
    pub news: Vec<NewsRecord>,
    pub prices: Vec<DailyPriceRecord>,
    pub benchmark: BTreeMap<NaiveDate, f64>,
}

impl Fixture {
    pub fn news_dataset(&self) -> Result<NewsDataset, IngestError> {
        NewsDataset::new(self.news.clone())
    }

    pub fn price_dataset(&self) -> Result<PriceDataset, IngestError> {
        PriceDataset::new(self.calendar.clone(), self.prices.clone(), self.benchmark.clone())
    }
}

pub fn stock_id(i: usize) -> StockId {
    let (exchange, code) = if i.is_multiple_of(2) {
        (Exchange::Sse, format!("{:06}", 600_000 + i / 2))
    } else {
        (Exchange::Szse, format!("{:06}", 1 + i / 2))
    };
    StockId::new(exchange, &code).expect("generated code is six digits")
}

fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

fn cents(v: f64) -> Price {
    let ticks = ((v * 100.0).round() as i64).max(1) * 100;
    Price::from_ticks(ticks).expect("positive")
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn pick_source(rng: &mut ChaCha8Rng) -> &'static str {
    let total: f64 = SOURCES.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for (name, w) in SOURCES {
        if u < w {
            return name;
        }
        u -= w;
    }
    SOURCES[0].0
}

pub fn generate(spec: &FixtureSpec) -> Result<Fixture, FixtureError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let dates = weekdays(spec.start, spec.days);
    let calendar = TradingCalendar::new(dates.clone()).expect("weekdays increase");
    let rho = spec.plant_corr;
    let idio = (1.0 - rho * rho).max(0.0).sqrt();

    let mut last_close: Vec<f64> = (0..spec.stocks).map(|_| rng.random_range(5.0..50.0)).collect();
    let mut level = 4000.0;
    let mut benchmark = BTreeMap::new();
    let mut news = Vec::new();
    let mut prices = Vec::new();
    let mut next_id = 0u64;

    for (di, &date) in dates.iter().enumerate() {
        let market = 0.0003 + 0.01 * normal(&mut rng);
        level = ((level * (1.0 + market)) * 1e4_f64).round() / 1e4;
        benchmark.insert(date, level);
        for (i, prev) in last_close.iter_mut().enumerate() {
            let stock = stock_id(i);
            let s = normal(&mut rng);
            let eps = normal(&mut rng);
            if rng.random_bool(spec.news_prob) {
                let items = rng.random_range(1..=3);
                for _ in 0..items {
                    next_id += 1;
                    let post_open = rng.random_bool(spec.post_open_share);
                    let (hour, minute, latent) = if post_open {
                        (rng.random_range(9..15), rng.random_range(30..60), normal(&mut rng))
                    } else {
                        let m = rng.random_range(6 * 60..9 * 60 + 30);
                        (m / 60, m % 60, s + 0.3 * normal(&mut rng))
                    };
                    news.push(NewsRecord {
                        news_id: format!("N{next_id:08}"),
                        stock,
                        timestamp: MarketTimestamp::new(date, hour, minute).expect("valid time"),
                        source: pick_source(&mut rng).to_string(),
                        payload: NewsPayload::Score {
                            value: logistic(1.7 * latent),
                            provider: Some(ProviderKind::ContinuousPositiveProb),
                        },
                    });
                }
            }
            let gap = di > 0 && rng.random_bool(spec.gap_prob);
            let suspended = rng.random_bool(spec.suspend_prob);
            let open = cents(*prev * (1.0 + 0.002 * normal(&mut rng)));
            let window: Vec<WindowTrade> = (0..5)
                .map(|_| WindowTrade {
                    price: cents(open.to_f64() * (1.0 + 0.001 * normal(&mut rng))),
                    volume: 100 * rng.random_range(1..100u64),
                })
                .collect();
            if gap {
                continue;
            }
            let close = if suspended {
                cents(*prev)
            } else {
                let r = market + spec.daily_vol * (rho * s + idio * eps);
                cents(*prev * (1.0 + r.max(-0.5)))
            };
            *prev = close.to_f64();
            prices.push(DailyPriceRecord {
                stock,
                date,
                opening: if i.is_multiple_of(2) {
                    OpeningPrints::Window(window)
                } else {
                    OpeningPrints::Vwap(open)
                },
                close,
                tradable: !suspended,
            });
        }
    }
    Ok(Fixture {
        calendar,
        news,
        prices,
        benchmark,
    })
}

pub const CALENDAR_FILE: &str = "calendar.csv";
pub const NEWS_FILE: &str = "news.csv";
pub const PRICES_FILE: &str = "prices.csv";
pub const BENCHMARK_FILE: &str = "benchmark.csv";
pub const CONFIG_FILE: &str = "config.toml";

fn write_file(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), FixtureError> {
    let mut buf = Vec::new();
    let io = |e: std::io::Error| FixtureError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    body(&mut buf).map_err(io)?;
    std::fs::write(path, buf).map_err(io)
}

/// Writes the fixture plus a ready-to-run config into `dir`.
pub fn write_fixture(fixture: &Fixture, dir: &Path) -> Result<Vec<PathBuf>, FixtureError> {
    std::fs::create_dir_all(dir).map_err(|e| FixtureError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let paths: Vec<PathBuf> = [CALENDAR_FILE, NEWS_FILE, PRICES_FILE, BENCHMARK_FILE, CONFIG_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();

    write_file(&paths[0], |out| {
        writeln!(out, "date")?;
        for d in fixture.calendar.iter() {
            writeln!(out, "{}", d.format("%Y-%m-%d"))?;
        }
        Ok(())
    })?;

    write_file(&paths[1], |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["news_id", "stock_id", "timestamp", "source", "text", "score", "provider"])?;
        for n in &fixture.news {
            let (text, score, provider) = match &n.payload {
                NewsPayload::Text(t) => (t.clone(), String::new(), String::new()),
                NewsPayload::Score { value, provider } => (
                    String::new(),
                    format!("{value}"),
                    provider.map(|p| p.to_string()).unwrap_or_default(),
                ),
            };
            w.write_record([
                n.news_id.clone(),
                n.stock.to_string(),
                n.timestamp.to_string(),
                n.source.clone(),
                text,
                score,
                provider,
            ])?;
        }
        w.flush()
    })?;

    write_file(&paths[2], |out| {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["stock_id".to_string(), "date".into(), "vwap_0930_0935".into()];
        header.extend((1..=5).map(|k| format!("w{k}_price")));
        header.extend((1..=5).map(|k| format!("w{k}_volume")));
        header.extend(["close".into(), "tradable".into()]);
        w.write_record(&header)?;
        for p in &fixture.prices {
            let mut row = vec![p.stock.to_string(), p.date.format("%Y-%m-%d").to_string()];
            match &p.opening {
                OpeningPrints::Vwap(v) => {
                    row.push(v.to_string());
                    row.extend(std::iter::repeat_n(String::new(), 10));
                }
                OpeningPrints::Window(trades) => {
                    row.push(String::new());
                    for k in 0..5 {
                        row.push(trades.get(k).map(|t| t.price.to_string()).unwrap_or_default());
                    }
                    for k in 0..5 {
                        row.push(trades.get(k).map(|t| t.volume.to_string()).unwrap_or_default());
                    }
                }
            }
            row.push(p.close.to_string());
            row.push(if p.tradable { "1" } else { "0" }.into());
            w.write_record(&row)?;
        }
        w.flush()
    })?;

    write_file(&paths[3], |out| {
        writeln!(out, "date,index_level")?;
        for (d, v) in &fixture.benchmark {
            writeln!(out, "{},{v}", d.format("%Y-%m-%d"))?;
        }
        Ok(())
    })?;

    write_file(&paths[4], |out| {
        writeln!(out, "factor_name = \"Synthetic\"")?;
        writeln!(out, "news = \"{NEWS_FILE}\"")?;
        writeln!(out, "prices = \"{PRICES_FILE}\"")?;
        writeln!(out, "benchmark = \"{BENCHMARK_FILE}\"")?;
        writeln!(out, "calendar = \"{CALENDAR_FILE}\"")?;
        writeln!(out, "provider = \"continuous_positive_prob\"")?;
        writeln!(out, "signed_transform = true")?;
        Ok(())
    })?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_benchmark, load_calendar, load_news, load_prices, LoadOptions, NewsFormat};

    #[test]
    fn seeded_generation_is_reproducible() {
        let spec = FixtureSpec::new(42, 5, 10, 0.5);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = FixtureSpec::new(43, 5, 10, 0.5);
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn files_round_trip_through_loaders() {
        let fx = generate(&FixtureSpec::new(7, 6, 15, 0.9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_fixture(&fx, dir.path()).unwrap();
        let cal = load_calendar(&dir.path().join(CALENDAR_FILE)).unwrap();
        assert_eq!(cal, fx.calendar);
        let news = load_news(&dir.path().join(NEWS_FILE), NewsFormat::Csv, LoadOptions::default()).unwrap();
        assert_eq!(news.data.records(), fx.news.as_slice());
        let prices = load_prices(
            &dir.path().join(PRICES_FILE),
            &dir.path().join(CALENDAR_FILE),
            &dir.path().join(BENCHMARK_FILE),
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(prices.data, fx.price_dataset().unwrap());
        let bench = load_benchmark(&dir.path().join(BENCHMARK_FILE), &cal, LoadOptions::default()).unwrap();
        assert_eq!(bench.data, fx.benchmark);
    }

    #[test]
    fn writes_identical_bytes() {
        let spec = FixtureSpec::new(42, 5, 10, 0.0);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_fixture(&generate(&spec).unwrap(), a.path()).unwrap();
        write_fixture(&generate(&spec).unwrap(), b.path()).unwrap();
        for f in [CALENDAR_FILE, NEWS_FILE, PRICES_FILE, BENCHMARK_FILE, CONFIG_FILE] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(generate(&FixtureSpec::new(1, 0, 10, 0.0)).is_err());
        assert!(generate(&FixtureSpec::new(1, 5, 10, 1.5)).is_err());
    }

    #[test]
    fn stock_ids_are_distinct() {
        let ids: std::collections::BTreeSet<StockId> = (0..1000).map(stock_id).collect();
        assert_eq!(ids.len(), 1000);
        assert_eq!(stock_id(0).to_string(), "SSE:600000");
        assert_eq!(stock_id(1).to_string(), "SZSE:000001");
    }
}
