//! Daily per-stock sentiment factors: aggregation, ranking, carry-forward
//! and the factor-group partition used for group excess-return curves.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{parse_date, parse_stock_id, NewsRecord, StockId, TradingCalendar};
use crate::sentiment::{ProviderKind, Scale, SentimentScore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError {
    #[error("scores come from more than one provider ({first} and {other})")]
    MixedProviders { first: ProviderKind, other: ProviderKind },
    #[error("scores mix {first} and {other} scales")]
    MixedScales { first: Scale, other: Scale },
    #[error("no scores to aggregate")]
    NoScores,
    #[error("group count must be at least 2, got {0}")]
    InvalidGroupCount(usize),
    #[error("cannot split {held} held stocks into {k} groups")]
    TooFewStocks { held: usize, k: usize },
    #[error("held stock {stock} has no factor value on {date}")]
    MissingFactor { stock: StockId, date: NaiveDate },
    #[error("factor value for {stock} on {date} is not finite")]
    NonFinite { stock: StockId, date: NaiveDate },
    #[error("factor panel {path}: {message}")]
    Io { path: String, message: String },
}

/// Factor values per trading date and stock, all from one provider.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorPanel {
    provider: ProviderKind,
    scale: Scale,
    values: BTreeMap<NaiveDate, BTreeMap<StockId, f64>>,
}

impl FactorPanel {
    pub fn empty(provider: ProviderKind, scale: Scale) -> Self {
        FactorPanel {
            provider,
            scale,
            values: BTreeMap::new(),
        }
    }

    /// Inserts or replaces one value.
    pub fn insert(&mut self, stock: StockId, date: NaiveDate, value: f64) -> Result<(), FactorError> {
        if !value.is_finite() {
            return Err(FactorError::NonFinite { stock, date });
        }
        self.values.entry(date).or_default().insert(stock, value);
        Ok(())
    }

    pub fn provider(&self) -> ProviderKind {
        self.provider
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn get(&self, stock: StockId, date: NaiveDate) -> Option<f64> {
        self.values.get(&date)?.get(&stock).copied()
    }

    pub fn on(&self, date: NaiveDate) -> Option<&BTreeMap<StockId, f64>> {
        self.values.get(&date)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.values.keys().copied()
    }

    /// Stocks with a value, per date.
    pub fn coverage(&self) -> BTreeMap<NaiveDate, usize> {
        self.values.iter().map(|(d, m)| (*d, m.len())).collect()
    }

    pub fn len(&self) -> usize {
        self.values.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(date, stock, value)` triples in date then stock order.
    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, StockId, f64)> + '_ {
        self.values
            .iter()
            .flat_map(|(d, m)| m.iter().map(move |(s, v)| (*d, *s, *v)))
    }

    /// Drops dates outside `calendar`; returns the panel and the number of
    /// values dropped.
    pub fn restrict_to(&self, calendar: &TradingCalendar) -> (FactorPanel, usize) {
        let mut dropped = 0;
        let mut values = BTreeMap::new();
        for (date, m) in &self.values {
            if calendar.contains(*date) {
                values.insert(*date, m.clone());
            } else {
                dropped += m.len();
            }
        }
        (
            FactorPanel {
                provider: self.provider,
                scale: self.scale,
                values,
            },
            dropped,
        )
    }

    /// Moves every value onto the signed scale with `v -> 2v - 1`.
    pub fn to_signed(&self) -> FactorPanel {
        let scale = self.scale;
        FactorPanel {
            provider: self.provider,
            scale: Scale::Signed,
            values: self
                .values
                .iter()
                .map(|(d, m)| (*d, m.iter().map(|(s, v)| (*s, scale.to_signed_value(*v))).collect()))
                .collect(),
        }
    }

    /// Writes `stock_id,date,factor_value,provider_kind,scale` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["stock_id", "date", "factor_value", "provider_kind", "scale"])?;
        for (date, stock, value) in self.iter() {
            w.write_record([
                stock.to_string(),
                date.format("%Y-%m-%d").to_string(),
                format!("{value}"),
                self.provider.to_string(),
                self.scale.to_string(),
            ])?;
        }
        w.flush()
    }

    /// Reads a panel written by [`FactorPanel::write_csv`]. The `scale`
    /// column is optional and defaults to the provider's native scale.
    pub fn read_csv(path: &Path) -> Result<FactorPanel, FactorError> {
        let io = |message: String| FactorError::Io {
            path: path.display().to_string(),
            message,
        };
        #[derive(Deserialize)]
        struct Row {
            stock_id: String,
            date: String,
            factor_value: f64,
            provider_kind: String,
            scale: Option<String>,
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| io(e.to_string()))?;
        let mut panel: Option<FactorPanel> = None;
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| io(format!("line {line}: {e}")))?;
            let stock = parse_stock_id(&row.stock_id).map_err(|e| io(format!("line {line}: {e}")))?;
            let date = parse_date(&row.date).map_err(|e| io(format!("line {line}: {e}")))?;
            let provider: ProviderKind = row.provider_kind.parse().map_err(|e| io(format!("line {line}: {e}")))?;
            let scale = match row.scale.as_deref().map(str::trim) {
                None | Some("") => provider.native_scale(),
                Some("signed") => Scale::Signed,
                Some("unit") => Scale::Unit,
                Some(other) => return Err(io(format!("line {line}: unknown scale {other:?}"))),
            };
            if !scale.contains(row.factor_value) {
                return Err(io(format!("line {line}: value {} outside {scale} scale", row.factor_value)));
            }
            let p = panel.get_or_insert_with(|| FactorPanel::empty(provider, scale));
            if p.provider != provider {
                return Err(FactorError::MixedProviders {
                    first: p.provider,
                    other: provider,
                });
            }
            if p.scale != scale {
                return Err(FactorError::MixedScales {
                    first: p.scale,
                    other: scale,
                });
            }
            if p.get(stock, date).is_some() {
                return Err(io(format!("line {line}: duplicate value for {stock} on {date}")));
            }
            p.insert(stock, date, row.factor_value)?;
        }
        panel.ok_or_else(|| io("no rows".into()))
    }
}

/// Averages each stock's same-day scores into one factor value.
///
/// Stocks without news on a date have no value for that date.
pub fn aggregate_daily(scores: &[(NewsRecord, SentimentScore)]) -> Result<FactorPanel, FactorError> {
    let (_, first) = scores.first().ok_or(FactorError::NoScores)?;
    let (provider, scale) = (first.provider(), first.scale());
    let mut sums: BTreeMap<(NaiveDate, StockId), (f64, usize)> = BTreeMap::new();
    for (rec, score) in scores {
        if score.provider() != provider {
            return Err(FactorError::MixedProviders {
                first: provider,
                other: score.provider(),
            });
        }
        if score.scale() != scale {
            return Err(FactorError::MixedScales {
                first: scale,
                other: score.scale(),
            });
        }
        let slot = sums.entry((rec.timestamp.date(), rec.stock)).or_insert((0.0, 0));
        slot.0 += score.value();
        slot.1 += 1;
    }
    let mut panel = FactorPanel::empty(provider, scale);
    for ((date, stock), (sum, n)) in sums {
        panel.insert(stock, date, sum / n as f64)?;
    }
    Ok(panel)
}

/// Stocks on one date, best factor first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyRanking {
    pub date: NaiveDate,
    pub scale: Scale,
    pub entries: Vec<(StockId, f64)>,
}

impl DailyRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn factor_of(&self, stock: StockId) -> Option<f64> {
        self.entries.iter().find(|(s, _)| *s == stock).map(|(_, v)| *v)
    }
}

/// Orders by descending factor; ties go to the smaller stock id.
pub fn rank_daily(panel: &FactorPanel, date: NaiveDate) -> DailyRanking {
    let mut entries: Vec<(StockId, f64)> = panel
        .on(date)
        .map(|m| m.iter().map(|(s, v)| (*s, *v)).collect())
        .unwrap_or_default();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    DailyRanking {
        date,
        scale: panel.scale,
        entries,
    }
}

/// Group index per held stock; group 1 holds the lowest factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAssignment {
    pub date: NaiveDate,
    pub k: usize,
    pub groups: BTreeMap<StockId, usize>,
}

impl GroupAssignment {
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for g in self.groups.values() {
            sizes[g - 1] += 1;
        }
        sizes
    }

    pub fn members(&self, group: usize) -> impl Iterator<Item = StockId> + '_ {
        self.groups.iter().filter(move |(_, g)| **g == group).map(|(s, _)| *s)
    }
}

/// Splits held stocks into `k` contiguous blocks by ascending factor.
///
/// Block sizes differ by at most one, with the larger blocks first.
pub fn assign_groups(held: &BTreeSet<StockId>, ranking: &DailyRanking, k: usize) -> Result<GroupAssignment, FactorError> {
    if k < 2 {
        return Err(FactorError::InvalidGroupCount(k));
    }
    if let Some(missing) = held.iter().find(|s| ranking.factor_of(**s).is_none()) {
        return Err(FactorError::MissingFactor {
            stock: *missing,
            date: ranking.date,
        });
    }
    if k > held.len() {
        return Err(FactorError::TooFewStocks { held: held.len(), k });
    }
    let ascending: Vec<StockId> = ranking
        .entries
        .iter()
        .rev()
        .filter(|(s, _)| held.contains(s))
        .map(|(s, _)| *s)
        .collect();
    let n = ascending.len();
    let (base, rem) = (n / k, n % k);
    let mut groups = BTreeMap::new();
    let mut it = ascending.into_iter();
    for g in 1..=k {
        let size = base + usize::from(g <= rem);
        for stock in it.by_ref().take(size) {
            groups.insert(stock, g);
        }
    }
    Ok(GroupAssignment {
        date: ranking.date,
        k,
        groups,
    })
}

/// Fills gaps with the most recent observed value no more than
/// `horizon_days` trading days old. Filled values never seed further fills.
pub fn carry_forward(panel: &FactorPanel, calendar: &TradingCalendar, horizon_days: usize) -> FactorPanel {
    if horizon_days == 0 {
        return panel.clone();
    }
    let mut stocks: BTreeSet<StockId> = BTreeSet::new();
    for m in panel.values.values() {
        stocks.extend(m.keys().copied());
    }
    let mut out = panel.clone();
    for stock in stocks {
        let mut last: Option<(usize, f64)> = None;
        for (idx, date) in calendar.iter().enumerate() {
            match panel.get(stock, date) {
                Some(v) => last = Some((idx, v)),
                None => {
                    if let Some((at, v)) = last {
                        if idx - at <= horizon_days {
                            out.values.entry(date).or_default().insert(stock, v);
                        }
                    }
                }
            }
        }
    }
    out
}
