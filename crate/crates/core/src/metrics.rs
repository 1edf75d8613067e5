//! Performance metrics over back-test ledgers and the factor-group analysis.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::engine::{opening_fill, DailyLedger, Side};
use crate::factor::{assign_groups, DailyRanking, FactorError, FactorPanel, GroupAssignment};
use crate::ingest::PriceDataset;
use crate::model::StockId;

pub const DEFAULT_DAYS_PER_YEAR: u32 = 243;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("NAV point {index} is not positive: {value}")]
    InvalidNav { index: usize, value: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("return series has zero variance")]
    DegenerateVariance,
    #[error("series misaligned at index {index}: {left} vs {right}")]
    AlignmentError {
        index: usize,
        left: NaiveDate,
        right: NaiveDate,
    },
    #[error("invalid return series: {0}")]
    InvalidSeries(String),
    #[error("{stock} held on {date} has no group")]
    MissingAssignment { stock: StockId, date: NaiveDate },
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// Simple daily returns on strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, returns: Vec<f64>) -> Result<Self, MetricsError> {
        if dates.len() != returns.len() {
            return Err(MetricsError::InvalidSeries(format!(
                "{} dates for {} returns",
                dates.len(),
                returns.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(MetricsError::InvalidSeries(format!("dates not increasing at {}", w[1])));
        }
        if let Some(r) = returns.iter().find(|r| !r.is_finite() || **r <= -1.0) {
            return Err(MetricsError::InvalidSeries(format!("return {r} out of range")));
        }
        Ok(ReturnSeries { dates, returns })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// `prod(1 + r) - 1` at each date.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 1.0;
        self.returns
            .iter()
            .map(|r| {
                acc *= 1.0 + r;
                acc - 1.0
            })
            .collect()
    }
}

/// `nav[i] / nav[i - 1] - 1` for consecutive points.
pub fn daily_returns(nav: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if nav.len() < 2 {
        return Err(MetricsError::TooShort {
            needed: 2,
            got: nav.len(),
        });
    }
    if let Some((index, &value)) = nav.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(MetricsError::InvalidNav { index, value });
    }
    Ok(nav.windows(2).map(|w| w[1] / w[0] - 1.0).collect())
}

/// The NAV curve a ledger implies: opening NAV of the first day followed by
/// every closing NAV.
pub fn nav_curve(ledgers: &[DailyLedger]) -> Vec<f64> {
    let mut nav = Vec::with_capacity(ledgers.len() + 1);
    if let Some(first) = ledgers.first() {
        nav.push(first.nav_open.to_f64());
    }
    nav.extend(ledgers.iter().map(|l| l.nav_close.to_f64()));
    nav
}

/// Portfolio returns, one per ledger day.
pub fn portfolio_returns(ledgers: &[DailyLedger]) -> Result<ReturnSeries, MetricsError> {
    let returns = daily_returns(&nav_curve(ledgers))?;
    ReturnSeries::new(ledgers.iter().map(|l| l.date).collect(), returns)
}

pub fn benchmark_returns(ledgers: &[DailyLedger]) -> Result<ReturnSeries, MetricsError> {
    ReturnSeries::new(
        ledgers.iter().map(|l| l.date).collect(),
        ledgers.iter().map(|l| l.benchmark_return).collect(),
    )
}

/// Geometric annual return in percent.
pub fn annualize(returns: &[f64], days_per_year: u32) -> f64 {
    if returns.is_empty() {
        return 0.0;
    }
    let growth: f64 = returns.iter().map(|r| 1.0 + r).product();
    (growth.powf(days_per_year as f64 / returns.len() as f64) - 1.0) * 100.0
}

/// Daily active return `r_port - r_bench`.
pub fn excess_return_series(port: &ReturnSeries, bench: &ReturnSeries) -> Result<ReturnSeries, MetricsError> {
    if port.len() != bench.len() {
        return Err(MetricsError::InvalidSeries(format!(
            "lengths differ: {} vs {}",
            port.len(),
            bench.len()
        )));
    }
    for (index, (l, r)) in port.dates.iter().zip(&bench.dates).enumerate() {
        if l != r {
            return Err(MetricsError::AlignmentError {
                index,
                left: *l,
                right: *r,
            });
        }
    }
    Ok(ReturnSeries {
        dates: port.dates.clone(),
        returns: port.returns.iter().zip(&bench.returns).map(|(p, b)| p - b).collect(),
    })
}

/// Percentage of days with a strictly positive return.
pub fn win_rate(returns: &[f64]) -> f64 {
    if returns.is_empty() {
        return 0.0;
    }
    100.0 * returns.iter().filter(|r| **r > 0.0).count() as f64 / returns.len() as f64
}

/// Annualized Sharpe ratio using the sample standard deviation.
pub fn sharpe(returns: &[f64], risk_free_annual: f64, days_per_year: u32) -> Result<f64, MetricsError> {
    let n = returns.len();
    if n < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: n });
    }
    let rf = (1.0 + risk_free_annual / 100.0).powf(1.0 / days_per_year as f64) - 1.0;
    let mean_raw = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean_raw).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 || sd <= f64::EPSILON * mean_raw.abs() {
        return Err(MetricsError::DegenerateVariance);
    }
    Ok((mean_raw - rf) / sd * (days_per_year as f64).sqrt())
}

/// Largest peak-to-trough decline as a fraction of the peak.
pub fn max_drawdown(nav: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in nav {
        peak = peak.max(v);
        worst = worst.max((peak - v) / peak);
    }
    worst
}

pub fn avg_stocks_held(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    counts.iter().sum::<usize>() as f64 / counts.len() as f64
}

pub fn holding_counts(ledgers: &[DailyLedger]) -> Vec<usize> {
    ledgers.iter().map(|l| l.held.len()).collect()
}

/// Mean daily one-sided turnover as a percentage of opening NAV.
pub fn turnover_ratio(ledgers: &[DailyLedger]) -> Result<f64, MetricsError> {
    if ledgers.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (index, l) in ledgers.iter().enumerate() {
        let nav = l.nav_open.to_f64();
        if nav <= 0.0 {
            return Err(MetricsError::InvalidNav { index, value: nav });
        }
        total += 100.0 * l.turnover_value.to_f64() / nav;
    }
    Ok(total / ledgers.len() as f64)
}

/// How the annual excess return is derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcessMode {
    /// Annualize the daily active-return series.
    #[default]
    DailyActive,
    /// Annualized portfolio return minus annualized benchmark return.
    DifferenceOfAnnualized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub risk_free_annual: f64,
    pub days_per_year: u32,
    pub excess_mode: ExcessMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            risk_free_annual: 0.0,
            days_per_year: DEFAULT_DAYS_PER_YEAR,
            excess_mode: ExcessMode::DailyActive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub annual_excess_return: f64,
    pub annual_net_asset_return: f64,
    pub win_rate: f64,
    pub sharpe_ratio: f64,
    /// Drawdown of the net asset curve.
    pub max_drawdown: f64,
    /// Drawdown of the cumulative excess-return curve.
    pub max_drawdown_excess: f64,
    pub avg_stocks_held: f64,
    pub turnover_ratio: f64,
    pub risk_free_rate_used: f64,
    pub trading_days_per_year_used: u32,
    pub excess_mode_used: ExcessMode,
    pub trading_days: usize,
}

pub fn compute_metrics(ledgers: &[DailyLedger], cfg: &MetricsConfig) -> Result<MetricsReport, MetricsError> {
    let port = portfolio_returns(ledgers)?;
    let bench = benchmark_returns(ledgers)?;
    let excess = excess_return_series(&port, &bench)?;
    let annual_net_asset_return = annualize(port.returns(), cfg.days_per_year);
    let annual_excess_return = match cfg.excess_mode {
        ExcessMode::DailyActive => annualize(excess.returns(), cfg.days_per_year),
        ExcessMode::DifferenceOfAnnualized => {
            annual_net_asset_return - annualize(bench.returns(), cfg.days_per_year)
        }
    };
    let excess_curve: Vec<f64> = std::iter::once(1.0)
        .chain(excess.cumulative().into_iter().map(|c| 1.0 + c))
        .collect();
    Ok(MetricsReport {
        annual_excess_return,
        annual_net_asset_return,
        win_rate: win_rate(port.returns()),
        sharpe_ratio: sharpe(port.returns(), cfg.risk_free_annual, cfg.days_per_year)?,
        max_drawdown: max_drawdown(&nav_curve(ledgers)),
        max_drawdown_excess: max_drawdown(&excess_curve),
        avg_stocks_held: avg_stocks_held(&holding_counts(ledgers)),
        turnover_ratio: turnover_ratio(ledgers)?,
        risk_free_rate_used: cfg.risk_free_annual,
        trading_days_per_year_used: cfg.days_per_year,
        excess_mode_used: cfg.excess_mode,
        trading_days: ledgers.len(),
    })
}

/// Groups the stocks held at each close by their latest known factor.
///
/// A stock keeps its last factor value for as long as it is held. Days
/// holding fewer than `k` stocks get no assignment.
pub fn group_assignments(
    ledgers: &[DailyLedger],
    panel: &FactorPanel,
    k: usize,
) -> Result<Vec<Option<GroupAssignment>>, MetricsError> {
    let mut latest: BTreeMap<StockId, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(ledgers.len());
    for l in ledgers {
        if let Some(values) = panel.on(l.date) {
            latest.extend(values.iter().map(|(s, v)| (*s, *v)));
        }
        if l.held.len() < k {
            out.push(None);
            continue;
        }
        let mut entries = Vec::with_capacity(l.held.len());
        for stock in &l.held {
            let v = latest.get(stock).ok_or(FactorError::MissingFactor {
                stock: *stock,
                date: l.date,
            })?;
            entries.push((*stock, *v));
        }
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let ranking = DailyRanking {
            date: l.date,
            scale: panel.scale(),
            entries,
        };
        let held: BTreeSet<StockId> = l.held.iter().copied().collect();
        out.push(Some(assign_groups(&held, &ranking, k)?));
    }
    Ok(out)
}

/// Cumulative excess return of each factor group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurves {
    pub dates: Vec<NaiveDate>,
    /// `curves[g][i]` is group `g + 1` on `dates[i]`.
    pub curves: Vec<Vec<f64>>,
}

impl GroupCurves {
    pub fn final_values(&self) -> Vec<f64> {
        self.curves.iter().map(|c| c.last().copied().unwrap_or(0.0)).collect()
    }
}

/// One stock's return over day `d` while it was held.
///
/// Stocks bought on `d` earn close over fill; stocks carried over earn
/// close over the previous close.
fn held_return(stock: StockId, ledger: &DailyLedger, prev: Option<NaiveDate>, prices: &PriceDataset) -> f64 {
    let Some(rec) = prices.get(stock, ledger.date) else {
        return 0.0;
    };
    let base = ledger
        .trades
        .iter()
        .find(|t| t.stock == stock && t.side == Side::Buy)
        .map(|t| t.fill_price)
        .or_else(|| prev.and_then(|p| prices.get(stock, p)).map(|r| r.close))
        .or_else(|| opening_fill(rec))
        .unwrap_or(rec.close);
    rec.close.to_f64() / base.to_f64() - 1.0
}

/// Equal-weight group return minus the benchmark, compounded per group.
///
/// Days without an assignment contribute zero excess to every group.
pub fn group_excess_curves(
    ledgers: &[DailyLedger],
    assignments: &[Option<GroupAssignment>],
    prices: &PriceDataset,
    k: usize,
) -> Result<GroupCurves, MetricsError> {
    if assignments.len() != ledgers.len() {
        return Err(MetricsError::InvalidSeries(format!(
            "{} assignments for {} days",
            assignments.len(),
            ledgers.len()
        )));
    }
    let mut curves = vec![Vec::with_capacity(ledgers.len()); k];
    let mut growth = vec![1.0; k];
    for (i, (l, a)) in ledgers.iter().zip(assignments).enumerate() {
        let prev = prices.calendar().index_of(l.date).and_then(|j| j.checked_sub(1)).map(|j| prices.calendar().dates()[j]);
        match a {
            Some(a) => {
                if a.date != l.date {
                    return Err(MetricsError::AlignmentError {
                        index: i,
                        left: l.date,
                        right: a.date,
                    });
                }
                if let Some(stock) = l.held.iter().find(|s| !a.groups.contains_key(s)) {
                    return Err(MetricsError::MissingAssignment {
                        stock: *stock,
                        date: l.date,
                    });
                }
                for (g, gr) in growth.iter_mut().enumerate() {
                    let rets: Vec<f64> = a.members(g + 1).map(|s| held_return(s, l, prev, prices)).collect();
                    let mean = if rets.is_empty() {
                        0.0
                    } else {
                        rets.iter().sum::<f64>() / rets.len() as f64
                    };
                    *gr *= 1.0 + mean - l.benchmark_return;
                }
            }
            None if l.held.len() >= k => {
                return Err(MetricsError::MissingAssignment {
                    stock: l.held[0],
                    date: l.date,
                })
            }
            None => {}
        }
        for (c, gr) in curves.iter_mut().zip(&growth) {
            c.push(gr - 1.0);
        }
    }
    Ok(GroupCurves {
        dates: ledgers.iter().map(|l| l.date).collect(),
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DayDiagnostics;
    use crate::model::Money;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn daily_return_examples() {
        assert_eq!(daily_returns(&[100.0, 110.0]).unwrap().len(), 1);
        assert!(close(daily_returns(&[100.0, 110.0]).unwrap()[0], 0.10));
        assert_eq!(daily_returns(&[100.0, 100.0, 100.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(daily_returns(&[100.0, 50.0, 100.0]).unwrap(), vec![-0.5, 1.0]);
        assert!(matches!(
            daily_returns(&[100.0, 0.0]),
            Err(MetricsError::InvalidNav { index: 1, .. })
        ));
        assert!(matches!(daily_returns(&[100.0]), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn annualize_examples() {
        assert_eq!(annualize(&[0.0; 20], 243), 0.0);
        assert!(close(annualize(&[0.037], 1), 3.7));
        let r = 1.1049f64.powf(1.0 / 243.0) - 1.0;
        assert!((annualize(&vec![r; 243], 243) - 10.49).abs() < 1e-9);
    }

    #[test]
    fn excess_examples() {
        let dates: Vec<NaiveDate> = (1..=3).map(|d| NaiveDate::from_ymd_opt(2022, 1, d).unwrap()).collect();
        let s = |r: f64| ReturnSeries::new(dates.clone(), vec![r; 3]).unwrap();
        assert_eq!(excess_return_series(&s(0.01), &s(0.01)).unwrap().returns(), &[0.0; 3]);
        let e = excess_return_series(&s(0.02), &s(0.01)).unwrap();
        assert!(close(e.returns()[0], 0.01));
        let e = excess_return_series(&s(0.0), &s(-0.01)).unwrap();
        assert!(annualize(e.returns(), 243) > 0.0);
        let shifted = ReturnSeries::new(dates[1..].to_vec(), vec![0.0; 2]).unwrap();
        let short = ReturnSeries::new(dates[..2].to_vec(), vec![0.0; 2]).unwrap();
        assert!(matches!(
            excess_return_series(&short, &shifted),
            Err(MetricsError::AlignmentError { index: 0, .. })
        ));
    }

    #[test]
    fn win_rate_examples() {
        assert_eq!(win_rate(&[0.1, 0.2, 0.3, -0.1]), 75.0);
        assert_eq!(win_rate(&[0.0; 5]), 0.0);
        let mut r = vec![0.001; 5838];
        r.extend(vec![-0.001; 10_000 - 5838]);
        assert!(close(win_rate(&r), 58.38));
    }

    #[test]
    fn sharpe_examples() {
        assert_eq!(sharpe(&[0.01; 10], 0.0, 243), Err(MetricsError::DegenerateVariance));
        let alt: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        assert!(sharpe(&alt, 0.0, 243).unwrap().abs() < 1e-15);
        // Two points at mean +/- a have sample standard deviation a * sqrt(2).
        let a = 0.01 / 2f64.sqrt();
        let s = sharpe(&[0.0005 + a, 0.0005 - a], 0.0, 243).unwrap();
        assert!((s - 0.0005 / 0.01 * 243f64.sqrt()).abs() < 1e-9);
        assert!((s - 0.7794).abs() < 1e-4);
    }

    #[test]
    fn drawdown_examples() {
        assert_eq!(max_drawdown(&[1.0, 1.1, 1.2]), 0.0);
        assert!(close(max_drawdown(&[1.0, 1.2, 0.9, 1.1]), 0.25));
        assert_eq!(max_drawdown(&[1.0, 0.5]), 0.5);
    }

    fn ledger(day: u32, nav_open: i64, turnover: i64, held: usize) -> DailyLedger {
        DailyLedger {
            date: NaiveDate::from_ymd_opt(2022, 1, day).unwrap(),
            trades: vec![],
            nav_open: Money::from_units(nav_open),
            nav_close: Money::from_units(nav_open),
            cash_close: Money::ZERO,
            turnover_value: Money::from_units(turnover),
            benchmark_return: 0.0,
            held: (0..held).map(|i| format!("SSE:{:06}", 600000 + i).parse().unwrap()).collect(),
            diagnostics: DayDiagnostics::default(),
        }
    }

    #[test]
    fn holdings_and_turnover_examples() {
        assert_eq!(avg_stocks_held(&[10, 10, 10]), 10.0);
        assert_eq!(avg_stocks_held(&[0, 10]), 5.0);
        assert_eq!(avg_stocks_held(&[1830; 7]), 1830.0);
        assert_eq!(turnover_ratio(&[ledger(1, 1000, 0, 0), ledger(2, 1000, 0, 0)]).unwrap(), 0.0);
        assert_eq!(turnover_ratio(&[ledger(1, 1000, 1000, 0)]).unwrap(), 100.0);
        // Buys of 30 and sells of 50 are 40 one-sided.
        assert_eq!(turnover_ratio(&[ledger(1, 1000, 40, 0)]).unwrap(), 4.0);
        assert_eq!(holding_counts(&[ledger(1, 1, 0, 3), ledger(2, 1, 0, 0)]), vec![3, 0]);
    }

    #[test]
    fn scale_invariance() {
        let nav = [100.0, 103.0, 99.0, 104.0, 101.0];
        let scaled: Vec<f64> = nav.iter().map(|v| v * 7.5).collect();
        let (a, b) = (daily_returns(&nav).unwrap(), daily_returns(&scaled).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!(close(*x, *y));
        }
        assert!(close(max_drawdown(&nav), max_drawdown(&scaled)));
        assert!(close(sharpe(&a, 0.0, 243).unwrap(), sharpe(&b, 0.0, 243).unwrap()));
        assert_eq!(win_rate(&a), win_rate(&b));
    }

    #[test]
    fn risk_free_lowers_sharpe() {
        let r = [0.01, -0.005, 0.003, 0.002];
        assert!(sharpe(&r, 3.0, 243).unwrap() < sharpe(&r, 0.0, 243).unwrap());
    }
}
