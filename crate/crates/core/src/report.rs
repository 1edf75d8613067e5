//! Report tables: one row per factor with the main and supplementary
//! metrics, rendered as CSV, JSON or aligned text.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

pub const FACTOR_NAME_COLUMN: &str = "Factor Name";
pub const MAIN_COLUMNS: [&str; 5] = [
    "Annual Excess Return (%)",
    "Annual Net Asset Return (%)",
    "Win Rate (%)",
    "Sharpe Ratio",
    "Max Withdrawal Rate",
];
pub const SUPPLEMENTARY_COLUMNS: [&str; 2] = ["Average Stocks Held per Day", "Turn-over Ratio (%)"];

/// Decimal places per value column, main columns first.
const DECIMALS: [usize; 7] = [2, 2, 2, 4, 4, 2, 2];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("no {REPORT_JSON} in run directory {}", dir.display())]
    MissingReport { dir: PathBuf },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("compare needs at least 2 run directories, got {0}")]
    TooFewRuns(usize),
}

/// What a run writes to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub factor_name: String,
    pub metrics: MetricsReport,
    /// Final cumulative excess return of each factor group, lowest first.
    pub group_final_excess: Vec<f64>,
}

impl BacktestReport {
    pub fn row(&self) -> ReportRow {
        let m = &self.metrics;
        ReportRow {
            factor_name: self.factor_name.clone(),
            values: [
                m.annual_excess_return,
                m.annual_net_asset_return,
                m.win_rate,
                m.sharpe_ratio,
                m.max_drawdown,
                m.avg_stocks_held,
                m.turnover_ratio,
            ],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn read(dir: &Path) -> Result<BacktestReport, ReportError> {
        let path = dir.join(REPORT_JSON);
        if !path.is_file() {
            return Err(ReportError::MissingReport { dir: dir.to_path_buf() });
        }
        let raw = std::fs::read_to_string(&path).map_err(|e| ReportError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&raw).map_err(|e| ReportError::Parse {
            path,
            message: e.to_string(),
        })
    }
}

/// One table row: the five main values then the two supplementary ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub factor_name: String,
    pub values: [f64; 7],
}

impl ReportRow {
    pub fn cells(&self) -> Vec<String> {
        std::iter::once(self.factor_name.clone())
            .chain(self.values.iter().zip(DECIMALS).map(|(v, dp)| format!("{v:.dp$}")))
            .collect()
    }
}

pub fn columns() -> Vec<&'static str> {
    std::iter::once(FACTOR_NAME_COLUMN)
        .chain(MAIN_COLUMNS)
        .chain(SUPPLEMENTARY_COLUMNS)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?}, expected text, csv or json")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ReportRow>,
}

impl ComparisonTable {
    /// Row indices holding the best displayed value of each main column.
    ///
    /// Higher is better except for the drawdown column.
    pub fn best(&self) -> [Vec<usize>; 5] {
        std::array::from_fn(|c| {
            let lower_is_better = c == 4;
            let shown: Vec<f64> = self
                .rows
                .iter()
                .map(|r| r.cells()[c + 1].parse::<f64>().unwrap_or(f64::NAN))
                .collect();
            let best = shown.iter().copied().filter(|v| !v.is_nan()).fold(None, |acc: Option<f64>, v| {
                Some(match acc {
                    None => v,
                    Some(a) if lower_is_better => a.min(v),
                    Some(a) => a.max(v),
                })
            });
            match best {
                Some(b) => (0..shown.len()).filter(|i| shown[*i] == b).collect(),
                None => Vec::new(),
            }
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(columns())?;
        for r in &self.rows {
            w.write_record(r.cells())?;
        }
        w.flush()
    }

    pub fn to_json(&self) -> String {
        let cols = columns();
        let rows: Vec<BTreeMap<&str, String>> = self
            .rows
            .iter()
            .map(|r| cols.iter().copied().zip(r.cells()).collect())
            .collect();
        let best: BTreeMap<&str, Vec<&str>> = MAIN_COLUMNS
            .iter()
            .zip(self.best())
            .map(|(c, idx)| (*c, idx.iter().map(|i| self.rows[*i].factor_name.as_str()).collect()))
            .collect();
        let doc = serde_json::json!({ "columns": cols, "rows": rows, "best": best });
        serde_json::to_string_pretty(&doc).expect("table serializes") + "\n"
    }

    /// Aligned text with a `*` after the best value of each main column.
    pub fn render_text(&self) -> String {
        let best = self.best();
        let mut table: Vec<Vec<String>> = vec![columns().iter().map(|c| c.to_string()).collect()];
        for (i, r) in self.rows.iter().enumerate() {
            let mut cells = r.cells();
            for (c, idx) in best.iter().enumerate() {
                cells[c + 1].push(if idx.contains(&i) { '*' } else { ' ' });
            }
            table.push(cells);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out.push_str("* best in column\n");
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => self.render_text(),
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => {
                let mut buf = Vec::new();
                self.write_csv(&mut buf).expect("in-memory write");
                String::from_utf8(buf).expect("utf-8")
            }
        }
    }
}

/// Collects the report of each run directory into one table.
pub fn compare<P: AsRef<Path>>(dirs: &[P]) -> Result<ComparisonTable, ReportError> {
    if dirs.len() < 2 {
        return Err(ReportError::TooFewRuns(dirs.len()));
    }
    let rows = dirs
        .iter()
        .map(|d| BacktestReport::read(d.as_ref()).map(|r| r.row()))
        .collect::<Result<_, _>>()?;
    Ok(ComparisonTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ExcessMode;

    fn report(name: &str, excess: f64, win: f64, mdd: f64) -> BacktestReport {
        BacktestReport {
            factor_name: name.into(),
            metrics: MetricsReport {
                annual_excess_return: excess,
                annual_net_asset_return: excess - 12.06,
                win_rate: win,
                sharpe_ratio: 0.6841,
                max_drawdown: mdd,
                max_drawdown_excess: 0.1,
                avg_stocks_held: 1830.0,
                turnover_ratio: 4.17,
                risk_free_rate_used: 0.0,
                trading_days_per_year_used: 243,
                excess_mode_used: ExcessMode::DailyActive,
                trading_days: 10,
            },
            group_final_excess: vec![0.0, 0.1, 0.2],
        }
    }

    #[test]
    fn published_row_formatting() {
        let row = report("Erlangshen-110M", 24.14, 58.38, 0.2219).row();
        assert_eq!(
            row.cells(),
            ["Erlangshen-110M", "24.14", "12.08", "58.38", "0.6841", "0.2219", "1830.00", "4.17"]
        );
    }

    #[test]
    fn column_sets() {
        assert_eq!(
            columns(),
            [
                "Factor Name",
                "Annual Excess Return (%)",
                "Annual Net Asset Return (%)",
                "Win Rate (%)",
                "Sharpe Ratio",
                "Max Withdrawal Rate",
                "Average Stocks Held per Day",
                "Turn-over Ratio (%)"
            ]
        );
    }

    #[test]
    fn best_per_column() {
        let t = ComparisonTable {
            rows: vec![
                report("GPT", 23.17, 57.78, 0.2315).row(),
                report("FinBERT", 19.88, 57.19, 0.2397).row(),
                report("Erlangshen", 24.14, 58.38, 0.2219).row(),
            ],
        };
        let best = t.best();
        assert_eq!(best[0], vec![2]);
        assert_eq!(best[2], vec![2]);
        assert_eq!(best[3], vec![0, 1, 2]);
        assert_eq!(best[4], vec![2]);
        let text = t.render_text();
        assert!(text.contains("24.14*"));
        assert!(text.contains("0.2219*"));
        assert!(!text.contains("0.2397*"));
        let json: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(json["rows"][2]["Win Rate (%)"], "58.38");
        assert_eq!(json["best"]["Max Withdrawal Rate"][0], "Erlangshen");
        let csv = t.render(OutputFormat::Csv);
        assert!(csv.starts_with("Factor Name,Annual Excess Return (%),"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn compare_reads_runs() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let r = report("X", 1.0, 50.0, 0.1);
        std::fs::write(a.path().join(REPORT_JSON), r.to_json()).unwrap();
        std::fs::write(b.path().join(REPORT_JSON), r.to_json()).unwrap();
        let t = compare(&[a.path(), b.path()]).unwrap();
        assert_eq!(t.rows[0], t.rows[1]);
        let empty = tempfile::tempdir().unwrap();
        match compare(&[a.path(), empty.path()]) {
            Err(ReportError::MissingReport { dir }) => assert_eq!(dir, empty.path()),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(compare(&[a.path()]), Err(ReportError::TooFewRuns(1)));
    }
}
