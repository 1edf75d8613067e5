//! Flat-file loaders for news, prices, the benchmark index and the trading
//! calendar, plus the pre-open news filter.
//!
//! Loaders are strict by default: the first bad row aborts the load. With
//! [`LoadOptions::skip_bad_rows`] bad rows are dropped and reported in
//! [`Loaded::skipped`], so `rows_read == records + skipped.len()` always.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    parse_date, parse_stock_id, DailyPriceRecord, ModelError, NewsPayload, NewsRecord, OpeningPrints, Price,
    StockId, TradingCalendar, WindowTrade,
};
use crate::sentiment::ProviderKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path}: {error}")]
    Row { path: String, error: RowError },
    #[error("duplicate news_id {news_id:?} on lines {lines:?}")]
    DuplicateNewsId { news_id: String, lines: Vec<u64> },
    #[error("duplicate price row for {stock} on {date}, lines {lines:?}")]
    DuplicatePrice {
        stock: StockId,
        date: NaiveDate,
        lines: Vec<u64>,
    },
    #[error("benchmark has no level for trading date {0}")]
    MissingBenchmark(NaiveDate),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A problem with one input row. `line` is the 1-based physical line,
/// counting the header.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub problem: RowProblem,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowProblem {
    MissingField(&'static str),
    InvalidField { field: &'static str, reason: String },
    NonPositivePrice { field: String },
    DateNotInCalendar(NaiveDate),
    AmbiguousPayload,
    EmptyWindow,
    DuplicateNewsId { first_line: u64 },
    DuplicatePrice { first_line: u64 },
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.problem {
            RowProblem::MissingField(field) => write!(f, "missing value for {field}"),
            RowProblem::InvalidField { field, reason } => write!(f, "invalid {field}: {reason}"),
            RowProblem::NonPositivePrice { field } => write!(f, "non-positive price in {field}"),
            RowProblem::DateNotInCalendar(d) => write!(f, "date {d} is not a trading date"),
            RowProblem::AmbiguousPayload => write!(f, "both text and score populated"),
            RowProblem::EmptyWindow => write!(f, "tradable day with no window volume"),
            RowProblem::DuplicateNewsId { first_line } => write!(f, "news_id already seen on line {first_line}"),
            RowProblem::DuplicatePrice { first_line } => write!(f, "stock/date already seen on line {first_line}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub skip_bad_rows: bool,
}

/// A loaded dataset together with what the loader saw.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub data: T,
    pub rows_read: usize,
    pub skipped: Vec<RowError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NewsFormat {
    Csv,
    Jsonl,
}

impl FromStr for NewsFormat {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(NewsFormat::Csv),
            "jsonl" | "ndjson" => Ok(NewsFormat::Jsonl),
            other => Err(IngestError::Io {
                path: String::new(),
                message: format!("unknown news format {other:?}"),
            }),
        }
    }
}

impl NewsFormat {
    /// Guesses from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => NewsFormat::Jsonl,
            _ => NewsFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewsDataset {
    records: Vec<NewsRecord>,
    source_histogram: BTreeMap<String, usize>,
}

impl NewsDataset {
    /// Builds a dataset, rejecting repeated news ids.
    pub fn new(records: Vec<NewsRecord>) -> Result<Self, IngestError> {
        let mut seen: HashMap<&str, Vec<u64>> = HashMap::new();
        let mut first_dup: Option<&str> = None;
        for (i, rec) in records.iter().enumerate() {
            let lines = seen.entry(rec.news_id.as_str()).or_default();
            lines.push(i as u64 + 1);
            if lines.len() == 2 && first_dup.is_none() {
                first_dup = Some(rec.news_id.as_str());
            }
        }
        if let Some(id) = first_dup {
            return Err(IngestError::DuplicateNewsId {
                news_id: id.to_string(),
                lines: seen[id].clone(),
            });
        }
        Ok(Self::from_unique(records))
    }

    fn from_unique(records: Vec<NewsRecord>) -> Self {
        let mut source_histogram = BTreeMap::new();
        for rec in &records {
            *source_histogram.entry(rec.source.clone()).or_insert(0) += 1;
        }
        NewsDataset {
            records,
            source_histogram,
        }
    }

    pub fn records(&self) -> &[NewsRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn source_histogram(&self) -> &BTreeMap<String, usize> {
        &self.source_histogram
    }
}

/// Keeps the records stamped strictly before 09:30, in order.
pub fn filter_pre_open(ds: &NewsDataset) -> NewsDataset {
    NewsDataset::from_unique(ds.records.iter().filter(|r| r.timestamp.is_pre_open()).cloned().collect())
}

/// Share of records per source, in percent.
pub fn news_source_report(ds: &NewsDataset) -> Result<BTreeMap<String, f64>, IngestError> {
    if ds.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    let n = ds.len() as f64;
    Ok(ds
        .source_histogram
        .iter()
        .map(|(src, &count)| (src.clone(), 100.0 * count as f64 / n))
        .collect())
}

/// Field access shared by the CSV and JSONL news readers.
trait RowFields {
    fn get(&self, field: &str) -> Option<String>;
}

struct CsvRow<'a> {
    header: &'a HashMap<String, usize>,
    record: &'a csv::StringRecord,
}

impl RowFields for CsvRow<'_> {
    fn get(&self, field: &str) -> Option<String> {
        let idx = *self.header.get(field)?;
        let v = self.record.get(idx)?.trim();
        (!v.is_empty()).then(|| v.to_string())
    }
}

impl RowFields for serde_json::Map<String, serde_json::Value> {
    fn get(&self, field: &str) -> Option<String> {
        match self.get(field)? {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) if s.trim().is_empty() => None,
            serde_json::Value::String(s) => Some(s.trim().to_string()),
            other => Some(other.to_string()),
        }
    }
}

fn required(row: &dyn RowFields, field: &'static str) -> Result<String, RowProblem> {
    row.get(field).ok_or(RowProblem::MissingField(field))
}

fn invalid(field: &'static str, e: impl ToString) -> RowProblem {
    RowProblem::InvalidField {
        field,
        reason: e.to_string(),
    }
}

fn parse_news_row(row: &dyn RowFields) -> Result<NewsRecord, RowProblem> {
    let news_id = required(row, "news_id")?;
    let stock = parse_stock_id(&required(row, "stock_id")?).map_err(|e| invalid("stock_id", e))?;
    let timestamp = required(row, "timestamp")?.parse().map_err(|e| invalid("timestamp", e))?;
    let source = required(row, "source")?;
    let provider = row
        .get("provider")
        .map(|p| p.parse::<ProviderKind>())
        .transpose()
        .map_err(|e| invalid("provider", e))?;
    let payload = match (row.get("text"), row.get("score")) {
        (Some(_), Some(_)) => return Err(RowProblem::AmbiguousPayload),
        (Some(text), None) => NewsPayload::Text(text),
        (None, Some(score)) => {
            let value: f64 = score.parse().map_err(|e| invalid("score", e))?;
            if !value.is_finite() {
                return Err(invalid("score", "not finite"));
            }
            NewsPayload::Score { value, provider }
        }
        (None, None) => return Err(RowProblem::MissingField("text")),
    };
    Ok(NewsRecord {
        news_id,
        stock,
        timestamp,
        source,
        payload,
    })
}

fn io_err(path: &Path, e: impl ToString) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn csv_reader(path: &Path) -> Result<(csv::Reader<std::fs::File>, HashMap<String, usize>), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    Ok((reader, header))
}

/// Collects row outcomes honouring the strict / skip policy.
struct RowSink<'p, T> {
    path: &'p Path,
    opts: LoadOptions,
    rows_read: usize,
    out: Vec<(u64, T)>,
    skipped: Vec<RowError>,
}

impl<'p, T> RowSink<'p, T> {
    fn new(path: &'p Path, opts: LoadOptions) -> Self {
        RowSink {
            path,
            opts,
            rows_read: 0,
            out: Vec::new(),
            skipped: Vec::new(),
        }
    }

    fn push(&mut self, line: u64, res: Result<T, RowProblem>) -> Result<(), IngestError> {
        self.rows_read += 1;
        match res {
            Ok(v) => self.out.push((line, v)),
            Err(problem) => self.reject(RowError { line, problem })?,
        }
        Ok(())
    }

    fn reject(&mut self, error: RowError) -> Result<(), IngestError> {
        if self.opts.skip_bad_rows {
            self.skipped.push(error);
            Ok(())
        } else {
            Err(IngestError::Row {
                path: self.path.display().to_string(),
                error,
            })
        }
    }
}

/// Loads a news file. Row order is preserved.
pub fn load_news(path: &Path, format: NewsFormat, opts: LoadOptions) -> Result<Loaded<NewsDataset>, IngestError> {
    let mut sink = RowSink::new(path, opts);
    match format {
        NewsFormat::Csv => {
            let (mut reader, header) = csv_reader(path)?;
            for column in ["news_id", "stock_id", "timestamp", "source"] {
                if !header.contains_key(column) {
                    return Err(IngestError::MissingColumn {
                        path: path.display().to_string(),
                        column,
                    });
                }
            }
            if !header.contains_key("text") && !header.contains_key("score") {
                return Err(IngestError::MissingColumn {
                    path: path.display().to_string(),
                    column: "text",
                });
            }
            for record in reader.records() {
                let record = record.map_err(|e| io_err(path, e))?;
                let line = record.position().map_or(0, |p| p.line());
                let row = CsvRow {
                    header: &header,
                    record: &record,
                };
                sink.push(line, parse_news_row(&row))?;
            }
        }
        NewsFormat::Jsonl => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            for (i, raw) in text.lines().enumerate() {
                if raw.trim().is_empty() {
                    continue;
                }
                let line = i as u64 + 1;
                let parsed = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(raw)
                    .map_err(|e| invalid("json", e))
                    .and_then(|obj| parse_news_row(&obj));
                sink.push(line, parsed)?;
            }
        }
    }

    let mut first_seen: HashMap<String, u64> = HashMap::new();
    let mut dup_lines: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for (line, rec) in &sink.out {
        match first_seen.get(&rec.news_id) {
            Some(&first) => dup_lines.entry(first).or_insert_with(|| vec![first]).push(*line),
            None => {
                first_seen.insert(rec.news_id.clone(), *line);
            }
        }
    }
    if let Some((&first, lines)) = dup_lines.iter().next() {
        if !opts.skip_bad_rows {
            let news_id = sink.out.iter().find(|(l, _)| *l == first).map(|(_, r)| r.news_id.clone());
            return Err(IngestError::DuplicateNewsId {
                news_id: news_id.unwrap_or_default(),
                lines: lines.clone(),
            });
        }
    }

    let mut records = Vec::with_capacity(sink.out.len());
    let mut skipped = sink.skipped;
    for (line, rec) in sink.out {
        let first = first_seen[&rec.news_id];
        if first == line {
            records.push(rec);
        } else {
            skipped.push(RowError {
                line,
                problem: RowProblem::DuplicateNewsId { first_line: first },
            });
        }
    }
    skipped.sort_by_key(|e| e.line);
    Ok(Loaded {
        data: NewsDataset::from_unique(records),
        rows_read: sink.rows_read,
        skipped,
    })
}

/// Reads one ISO date per line, ascending. A leading `date` header is allowed.
pub fn load_calendar(path: &Path) -> Result<TradingCalendar, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut dates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() || (i == 0 && raw.eq_ignore_ascii_case("date")) {
            continue;
        }
        let date = parse_date(raw).map_err(|e| IngestError::Row {
            path: path.display().to_string(),
            error: RowError {
                line: i as u64 + 1,
                problem: invalid("date", e),
            },
        })?;
        dates.push(date);
    }
    Ok(TradingCalendar::new(dates)?)
}

/// Per-stock daily prices aligned to the trading calendar, with the
/// benchmark index level for each calendar date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceDataset {
    calendar: TradingCalendar,
    by_date: BTreeMap<NaiveDate, BTreeMap<StockId, DailyPriceRecord>>,
    benchmark: Vec<f64>,
    synthesized: usize,
}

impl PriceDataset {
    /// Assembles a dataset from in-memory records.
    ///
    /// Dates a stock skips between its first record and the end of the
    /// calendar are filled with non-tradable records at the last close.
    pub fn new(
        calendar: TradingCalendar,
        records: Vec<DailyPriceRecord>,
        benchmark: BTreeMap<NaiveDate, f64>,
    ) -> Result<Self, IngestError> {
        let mut levels = Vec::with_capacity(calendar.len());
        for date in calendar.iter() {
            match benchmark.get(&date) {
                Some(&v) if v > 0.0 && v.is_finite() => levels.push(v),
                Some(&v) => return Err(ModelError::NonPositivePrice(v).into()),
                None => return Err(IngestError::MissingBenchmark(date)),
            }
        }
        let mut by_stock: BTreeMap<StockId, BTreeMap<NaiveDate, DailyPriceRecord>> = BTreeMap::new();
        for rec in records {
            rec.validate()?;
            if !calendar.contains(rec.date) {
                return Err(IngestError::Row {
                    path: String::new(),
                    error: RowError {
                        line: 0,
                        problem: RowProblem::DateNotInCalendar(rec.date),
                    },
                });
            }
            let slot = by_stock.entry(rec.stock).or_default();
            if slot.contains_key(&rec.date) {
                return Err(IngestError::DuplicatePrice {
                    stock: rec.stock,
                    date: rec.date,
                    lines: vec![],
                });
            }
            slot.insert(rec.date, rec);
        }

        let mut by_date: BTreeMap<NaiveDate, BTreeMap<StockId, DailyPriceRecord>> =
            calendar.iter().map(|d| (d, BTreeMap::new())).collect();
        let mut synthesized = 0;
        for (stock, rows) in by_stock {
            let first = *rows.keys().next().expect("non-empty");
            let mut last_close: Option<Price> = None;
            for date in calendar.iter().filter(|d| *d >= first) {
                let rec = match rows.get(&date) {
                    Some(rec) => rec.clone(),
                    None => {
                        synthesized += 1;
                        DailyPriceRecord {
                            stock,
                            date,
                            opening: OpeningPrints::Window(Vec::new()),
                            close: last_close.expect("first date has a record"),
                            tradable: false,
                        }
                    }
                };
                last_close = Some(rec.close);
                by_date.get_mut(&date).expect("calendar date").insert(stock, rec);
            }
        }
        Ok(PriceDataset {
            calendar,
            by_date,
            benchmark: levels,
            synthesized,
        })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn get(&self, stock: StockId, date: NaiveDate) -> Option<&DailyPriceRecord> {
        self.by_date.get(&date)?.get(&stock)
    }

    /// All records for one trading date, ordered by stock.
    pub fn day(&self, date: NaiveDate) -> Option<&BTreeMap<StockId, DailyPriceRecord>> {
        self.by_date.get(&date)
    }

    pub fn benchmark_level(&self, date: NaiveDate) -> Option<f64> {
        self.calendar.index_of(date).map(|i| self.benchmark[i])
    }

    pub fn benchmark_levels(&self) -> &[f64] {
        &self.benchmark
    }

    /// Simple benchmark return for a date; 0 on the first calendar date.
    pub fn benchmark_return(&self, date: NaiveDate) -> Option<f64> {
        let i = self.calendar.index_of(date)?;
        Some(if i == 0 {
            0.0
        } else {
            self.benchmark[i] / self.benchmark[i - 1] - 1.0
        })
    }

    pub fn len(&self) -> usize {
        self.by_date.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records filled in for missing stock-days.
    pub fn synthesized(&self) -> usize {
        self.synthesized
    }

    pub fn stocks(&self) -> Vec<StockId> {
        let mut all: Vec<StockId> = self.by_date.values().flat_map(|m| m.keys().copied()).collect();
        all.sort();
        all.dedup();
        all
    }
}

fn parse_price_field(row: &dyn RowFields, field: &'static str) -> Result<Option<Price>, RowProblem> {
    match row.get(field) {
        None => Ok(None),
        Some(raw) => match raw.parse::<Price>() {
            Ok(p) => Ok(Some(p)),
            Err(ModelError::NonPositivePrice(_)) => Err(RowProblem::NonPositivePrice { field: field.to_string() }),
            Err(e) => Err(invalid(field, e)),
        },
    }
}

const WINDOW_PRICE: [&str; 5] = ["w1_price", "w2_price", "w3_price", "w4_price", "w5_price"];
const WINDOW_VOLUME: [&str; 5] = ["w1_volume", "w2_volume", "w3_volume", "w4_volume", "w5_volume"];

fn parse_price_row(row: &dyn RowFields, calendar: &TradingCalendar) -> Result<DailyPriceRecord, RowProblem> {
    let stock = parse_stock_id(&required(row, "stock_id")?).map_err(|e| invalid("stock_id", e))?;
    let date = parse_date(&required(row, "date")?).map_err(|e| invalid("date", e))?;
    if !calendar.contains(date) {
        return Err(RowProblem::DateNotInCalendar(date));
    }
    let close = parse_price_field(row, "close")?.ok_or(RowProblem::MissingField("close"))?;
    let tradable = match required(row, "tradable")?.as_str() {
        "1" | "true" | "TRUE" | "True" => true,
        "0" | "false" | "FALSE" | "False" => false,
        other => return Err(invalid("tradable", format!("expected 0 or 1, got {other:?}"))),
    };
    let vwap = parse_price_field(row, "vwap_0930_0935")?;
    let mut window = Vec::new();
    for (pf, vf) in WINDOW_PRICE.iter().zip(WINDOW_VOLUME) {
        let price = parse_price_field(row, pf)?;
        let volume = row
            .get(vf)
            .map(|v| v.parse::<u64>().map_err(|e| invalid(vf, e)))
            .transpose()?;
        match (price, volume) {
            (Some(price), Some(volume)) => window.push(WindowTrade { price, volume }),
            (None, None) => {}
            (Some(_), None) => return Err(RowProblem::MissingField(vf)),
            (None, Some(_)) => return Err(RowProblem::MissingField(pf)),
        }
    }
    let opening = match (vwap, window.is_empty()) {
        (Some(_), false) => return Err(invalid("vwap_0930_0935", "both vwap and window columns populated")),
        (Some(v), true) => OpeningPrints::Vwap(v),
        (None, false) => OpeningPrints::Window(window),
        (None, true) if !tradable => OpeningPrints::Window(Vec::new()),
        (None, true) => return Err(RowProblem::MissingField("vwap_0930_0935")),
    };
    let rec = DailyPriceRecord {
        stock,
        date,
        opening,
        close,
        tradable,
    };
    rec.validate().map_err(|_| RowProblem::EmptyWindow)?;
    Ok(rec)
}

/// Reads `date,index_level` rows for every calendar date.
pub fn load_benchmark(
    path: &Path,
    calendar: &TradingCalendar,
    opts: LoadOptions,
) -> Result<Loaded<BTreeMap<NaiveDate, f64>>, IngestError> {
    let (mut reader, header) = csv_reader(path)?;
    for column in ["date", "index_level"] {
        if !header.contains_key(column) {
            return Err(IngestError::MissingColumn {
                path: path.display().to_string(),
                column,
            });
        }
    }
    let mut sink = RowSink::new(path, opts);
    for record in reader.records() {
        let record = record.map_err(|e| io_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = CsvRow {
            header: &header,
            record: &record,
        };
        let parsed = (|| {
            let date = parse_date(&required(&row, "date")?).map_err(|e| invalid("date", e))?;
            if !calendar.contains(date) {
                return Err(RowProblem::DateNotInCalendar(date));
            }
            let level: f64 = required(&row, "index_level")?
                .parse()
                .map_err(|e| invalid("index_level", e))?;
            if !(level.is_finite() && level > 0.0) {
                return Err(RowProblem::NonPositivePrice {
                    field: "index_level".into(),
                });
            }
            Ok((date, level))
        })();
        sink.push(line, parsed)?;
    }
    let rows_read = sink.rows_read;
    let mut skipped = sink.skipped;
    let mut levels = BTreeMap::new();
    let mut first_line = BTreeMap::new();
    for (line, (date, level)) in sink.out {
        if let Some(&first) = first_line.get(&date) {
            let error = RowError {
                line,
                problem: RowProblem::DuplicatePrice { first_line: first },
            };
            if !opts.skip_bad_rows {
                return Err(IngestError::Row {
                    path: path.display().to_string(),
                    error,
                });
            }
            skipped.push(error);
            continue;
        }
        first_line.insert(date, line);
        levels.insert(date, level);
    }
    Ok(Loaded {
        data: levels,
        rows_read,
        skipped,
    })
}

/// Loads the calendar, benchmark and per-stock price files into one dataset.
///
/// `rows_read` and `skipped` refer to the price file.
pub fn load_prices(
    prices: &Path,
    calendar: &Path,
    benchmark: &Path,
    opts: LoadOptions,
) -> Result<Loaded<PriceDataset>, IngestError> {
    let calendar = load_calendar(calendar)?;
    let bench = load_benchmark(benchmark, &calendar, opts)?;
    let (mut reader, header) = csv_reader(prices)?;
    for column in ["stock_id", "date", "close", "tradable"] {
        if !header.contains_key(column) {
            return Err(IngestError::MissingColumn {
                path: prices.display().to_string(),
                column,
            });
        }
    }
    let mut sink = RowSink::new(prices, opts);
    for record in reader.records() {
        let record = record.map_err(|e| io_err(prices, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = CsvRow {
            header: &header,
            record: &record,
        };
        sink.push(line, parse_price_row(&row, &calendar))?;
    }

    let mut first_line: HashMap<(StockId, NaiveDate), u64> = HashMap::new();
    let mut records = Vec::with_capacity(sink.out.len());
    let mut skipped = sink.skipped;
    for (line, rec) in sink.out {
        let key = (rec.stock, rec.date);
        if let Some(&first) = first_line.get(&key) {
            if !opts.skip_bad_rows {
                return Err(IngestError::DuplicatePrice {
                    stock: rec.stock,
                    date: rec.date,
                    lines: vec![first, line],
                });
            }
            skipped.push(RowError {
                line,
                problem: RowProblem::DuplicatePrice { first_line: first },
            });
            continue;
        }
        first_line.insert(key, line);
        records.push(rec);
    }
    skipped.sort_by_key(|e| e.line);
    Ok(Loaded {
        data: PriceDataset::new(calendar, records, bench.data)?,
        rows_read: sink.rows_read,
        skipped,
    })
}
