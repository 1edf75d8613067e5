//! End-to-end runs driven by a flat TOML config.
//!
//! A run loads the inputs, scores news into a factor panel (or reads an
//! exported panel), back-tests it, and writes reports, series, the trade
//! ledger and a manifest of input and output digests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{run_backtest, write_ledger_csv, write_nav_csv, BacktestConfig, BacktestRun};
use crate::factor::{aggregate_daily, carry_forward, FactorPanel};
use crate::ingest::{filter_pre_open, load_calendar, load_news, load_prices, LoadOptions, NewsDataset, NewsFormat, PriceDataset};
use crate::metrics::{
    benchmark_returns, compute_metrics, excess_return_series, group_assignments, group_excess_curves, portfolio_returns,
    ExcessMode, GroupCurves, MetricsConfig, MetricsReport,
};
use crate::model::{NewsPayload, TradingCalendar};
use crate::report::{BacktestReport, ComparisonTable, REPORT_CSV, REPORT_JSON};
use crate::sentiment::{score_news, OracleProvider, PrecomputedProvider, ProviderKind, ResponseParser, ScoreProvider};

pub const TOOL_NAME: &str = "sentibench";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FACTOR_PANEL_FILE: &str = "factor_panel.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Input,
    Runtime,
}

/// A failure anywhere in a run, reported as one structured line.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct PipelineError {
    pub kind: ErrorKind,
    pub module: &'static str,
    pub operation: &'static str,
    pub location: String,
    pub message: String,
}

impl PipelineError {
    fn new(
        kind: ErrorKind,
        module: &'static str,
        operation: &'static str,
        location: impl Into<String>,
        message: impl ToString,
    ) -> Self {
        PipelineError {
            kind,
            module,
            operation,
            location: location.into(),
            message: message.to_string(),
        }
    }

    fn config(location: impl Into<String>, message: impl ToString) -> Self {
        Self::new(ErrorKind::Config, "cli", "load_config", location, message)
    }

    /// Process exit status: 2 for config problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Input | ErrorKind::Runtime => 1,
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let message = self.message.replace(['\n', '\r'], " ");
        write!(
            f,
            "error module={} operation={} location={:?} message={:?}",
            self.module, self.operation, self.location, message
        )
    }
}

/// Run keys that sit beside the [`BacktestConfig`] fields in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(default = "default_factor_name")]
    pub factor_name: String,
    pub prices: PathBuf,
    pub benchmark: PathBuf,
    pub calendar: PathBuf,
    #[serde(default)]
    pub news: Option<PathBuf>,
    #[serde(default)]
    pub news_format: Option<NewsFormat>,
    /// File-backed scores keyed by news id; otherwise scores come from the
    /// news file itself.
    #[serde(default)]
    pub oracle: Option<PathBuf>,
    /// Provider of the scores stored in the news file.
    #[serde(default)]
    pub provider: Option<ProviderKind>,
    /// A previously exported panel, used instead of scoring news.
    #[serde(default)]
    pub factor_panel: Option<PathBuf>,
    /// Map unit-scale factors onto the signed scale before ranking.
    #[serde(default)]
    pub signed_transform: bool,
    #[serde(default = "default_carry")]
    pub carry_forward_days: usize,
    #[serde(default)]
    pub risk_free_annual: f64,
    #[serde(default = "default_days_per_year")]
    pub days_per_year: u32,
    #[serde(default)]
    pub excess_mode: ExcessMode,
    #[serde(default)]
    pub skip_bad_rows: bool,
}

const RUN_KEYS: [&str; 15] = [
    "factor_name",
    "prices",
    "benchmark",
    "calendar",
    "news",
    "news_format",
    "oracle",
    "provider",
    "factor_panel",
    "signed_transform",
    "carry_forward_days",
    "risk_free_annual",
    "days_per_year",
    "excess_mode",
    "skip_bad_rows",
];

fn default_factor_name() -> String {
    "Factor".into()
}

fn default_carry() -> usize {
    5
}

fn default_days_per_year() -> u32 {
    crate::metrics::DEFAULT_DAYS_PER_YEAR
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub settings: RunSettings,
    pub backtest: BacktestConfig,
    /// Relative input paths resolve against this directory.
    pub base_dir: PathBuf,
    pub source: toml::Table,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, PipelineError> {
        let raw = std::fs::read_to_string(path).map_err(|e| PipelineError::config(path.display().to_string(), e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&raw, &base).map_err(|mut e| {
            e.location = format!("{}: {}", path.display(), e.location);
            e
        })
    }

    pub fn parse(raw: &str, base_dir: &Path) -> Result<RunConfig, PipelineError> {
        let source: toml::Table = raw.parse().map_err(|e| PipelineError::config("toml", e))?;
        let (mut run, mut backtest) = (toml::Table::new(), toml::Table::new());
        for (k, v) in &source {
            if RUN_KEYS.contains(&k.as_str()) {
                run.insert(k.clone(), v.clone());
            } else {
                backtest.insert(k.clone(), v.clone());
            }
        }
        let settings: RunSettings = run.try_into().map_err(|e| PipelineError::config("run settings", e))?;
        let backtest: BacktestConfig = backtest.try_into().map_err(|e| PipelineError::config("backtest", e))?;
        backtest.validate().map_err(|e| PipelineError::config(e.field, &e))?;
        let cfg = RunConfig {
            settings,
            backtest,
            base_dir: base_dir.to_path_buf(),
            source,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), PipelineError> {
        let s = &self.settings;
        match (&s.news, &s.factor_panel) {
            (None, None) => return Err(PipelineError::config("news", "set either news or factor_panel")),
            (Some(_), Some(_)) => return Err(PipelineError::config("news", "set only one of news and factor_panel")),
            _ => {}
        }
        if s.oracle.is_some() && s.news.is_none() {
            return Err(PipelineError::config("oracle", "oracle needs a news file"));
        }
        if s.days_per_year == 0 {
            return Err(PipelineError::config("days_per_year", "must be at least 1"));
        }
        if !s.risk_free_annual.is_finite() || s.risk_free_annual <= -100.0 {
            return Err(PipelineError::config("risk_free_annual", "must be a finite percentage above -100"));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            risk_free_annual: self.settings.risk_free_annual,
            days_per_year: self.settings.days_per_year,
            excess_mode: self.settings.excess_mode,
        }
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            skip_bad_rows: self.settings.skip_bad_rows,
        }
    }

    /// Input files named by the config, keyed by config field.
    pub fn inputs(&self) -> BTreeMap<&'static str, PathBuf> {
        let s = &self.settings;
        let mut m = BTreeMap::from([
            ("prices", self.resolve(&s.prices)),
            ("benchmark", self.resolve(&s.benchmark)),
            ("calendar", self.resolve(&s.calendar)),
        ]);
        for (k, v) in [("news", &s.news), ("oracle", &s.oracle), ("factor_panel", &s.factor_panel)] {
            if let Some(p) = v {
                m.insert(k, self.resolve(p));
            }
        }
        m
    }
}

/// Counters describing what a run kept and dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub news_rows_read: usize,
    pub news_rows_skipped: usize,
    pub news_after_open: usize,
    pub unmatched_responses: u64,
    pub factor_values: usize,
    pub factor_values_off_calendar: usize,
    pub price_rows_read: usize,
    pub price_rows_skipped: usize,
    pub price_rows_synthesized: usize,
    pub buys_below_one_lot: usize,
    pub buys_cut_by_turnover_cap: usize,
    pub sells_cut_by_turnover_cap: usize,
}

/// Averages scored pre-open news into a factor panel on `calendar`.
///
/// Returns the panel and the number of values dropped for falling on
/// non-trading dates.
pub fn build_panel<P>(
    news: &NewsDataset,
    provider: &P,
    calendar: &TradingCalendar,
    signed_transform: bool,
) -> Result<(FactorPanel, usize), PipelineError>
where
    P: ScoreProvider + ?Sized,
{
    let scores = score_news(news, provider)
        .map_err(|e| PipelineError::new(ErrorKind::Input, "sentiment", "score_news", "news", e))?;
    let pairs: Vec<_> = news.records().iter().cloned().zip(scores.into_iter().map(|(_, s)| s)).collect();
    let panel = aggregate_daily(&pairs)
        .map_err(|e| PipelineError::new(ErrorKind::Input, "factor", "aggregate_daily", "news", e))?;
    let (panel, dropped) = panel.restrict_to(calendar);
    let panel = if signed_transform { panel.to_signed() } else { panel };
    Ok((panel, dropped))
}

/// Everything derived from one back-test.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub run: BacktestRun,
    pub metrics: MetricsReport,
    pub groups: GroupCurves,
}

/// Back-tests `panel` and computes metrics and group curves.
///
/// The engine ranks on the panel with gaps filled up to
/// `carry_forward_days`; group analysis ranks each held stock on its latest
/// value however old.
pub fn analyze(
    panel: &FactorPanel,
    prices: &PriceDataset,
    cfg: &BacktestConfig,
    carry_forward_days: usize,
    metrics: &MetricsConfig,
) -> Result<Analysis, PipelineError> {
    let rt = |module, op, e: &dyn ToString| PipelineError::new(ErrorKind::Runtime, module, op, "", e.to_string());
    let engine_panel = carry_forward(panel, prices.calendar(), carry_forward_days);
    let run = run_backtest(&engine_panel, prices, cfg).map_err(|e| {
        let location = match &e {
            crate::engine::EngineError::Step { date, .. } => date.to_string(),
            _ => String::new(),
        };
        PipelineError::new(ErrorKind::Runtime, "engine", "run_backtest", location, e)
    })?;
    let report = compute_metrics(&run.ledgers, metrics).map_err(|e| rt("metrics", "compute_metrics", &e))?;
    let assignments =
        group_assignments(&run.ledgers, panel, cfg.group_count).map_err(|e| rt("metrics", "group_assignments", &e))?;
    let groups = group_excess_curves(&run.ledgers, &assignments, prices, cfg.group_count)
        .map_err(|e| rt("metrics", "group_excess_curves", &e))?;
    Ok(Analysis {
        run,
        metrics: report,
        groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Receipt of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_ms: u128,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn digest_inputs(cfg: &RunConfig) -> Result<BTreeMap<String, FileDigest>, PipelineError> {
    cfg.inputs()
        .into_iter()
        .map(|(k, p)| {
            let sha256 = sha256_file(&p)
                .map_err(|e| PipelineError::new(ErrorKind::Input, "ingest", "read_input", p.display().to_string(), e))?;
            Ok((
                k.to_string(),
                FileDigest {
                    path: p.display().to_string(),
                    sha256,
                },
            ))
        })
        .collect()
}

/// Collects output files in memory, then writes them with their digests.
struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn new(dir: &Path) -> Self {
        OutputSet {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), PipelineError> {
        let mut buf = Vec::new();
        body(&mut buf).map_err(|e| PipelineError::new(ErrorKind::Runtime, "cli", "write_output", name, e))?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn commit(self, manifest: impl FnOnce(Vec<FileDigest>) -> RunManifest) -> Result<Vec<PathBuf>, PipelineError> {
        let werr = |p: &Path, e: std::io::Error| {
            PipelineError::new(ErrorKind::Runtime, "cli", "write_output", p.display().to_string(), e)
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| werr(&self.dir, e))?;
        let mut digests = Vec::new();
        let mut written = Vec::new();
        for (name, body) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, body).map_err(|e| werr(&path, e))?;
            digests.push(FileDigest {
                path: name.clone(),
                sha256: hex::encode(Sha256::digest(body)),
            });
            written.push(path);
        }
        let m = manifest(digests);
        let path = self.dir.join(MANIFEST_FILE);
        let body = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
        std::fs::write(&path, body).map_err(|e| werr(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

fn manifest_for(cfg: &RunConfig, command: &str, inputs: BTreeMap<String, FileDigest>, started: Instant) -> impl FnOnce(Vec<FileDigest>) -> RunManifest {
    let config = serde_json::to_value(&cfg.source).expect("toml table converts to json");
    let command = command.to_string();
    move |outputs| RunManifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command,
        config,
        inputs,
        outputs,
        wall_clock_ms: started.elapsed().as_millis(),
    }
}

fn ingest_err(op: &'static str, location: &Path, e: impl ToString) -> PipelineError {
    PipelineError::new(ErrorKind::Input, "ingest", op, location.display().to_string(), e)
}

/// Loads news and scores it into a factor panel on the configured calendar.
pub fn score_panel(cfg: &RunConfig, diag: &mut RunDiagnostics) -> Result<FactorPanel, PipelineError> {
    let s = &cfg.settings;
    let calendar_path = cfg.resolve(&s.calendar);
    let calendar = load_calendar(&calendar_path).map_err(|e| ingest_err("load_calendar", &calendar_path, e))?;
    if let Some(panel_path) = &s.factor_panel {
        let path = cfg.resolve(panel_path);
        let panel = FactorPanel::read_csv(&path)
            .map_err(|e| PipelineError::new(ErrorKind::Input, "factor", "read_panel", path.display().to_string(), e))?;
        let (panel, dropped) = panel.restrict_to(&calendar);
        diag.factor_values_off_calendar = dropped;
        diag.factor_values = panel.len();
        return Ok(if s.signed_transform { panel.to_signed() } else { panel });
    }
    let news_path = cfg.resolve(s.news.as_ref().expect("checked at load"));
    let format = s.news_format.unwrap_or_else(|| NewsFormat::from_path(&news_path));
    let loaded = load_news(&news_path, format, cfg.load_options()).map_err(|e| ingest_err("load_news", &news_path, e))?;
    diag.news_rows_read = loaded.rows_read;
    diag.news_rows_skipped = loaded.skipped.len();
    let news = filter_pre_open(&loaded.data);
    diag.news_after_open = loaded.data.len() - news.len();

    let (panel, dropped) = if let Some(oracle) = &s.oracle {
        let path = cfg.resolve(oracle);
        let parser = ResponseParser::default();
        let provider = OracleProvider::load(&path, &parser).map_err(|e| {
            PipelineError::new(ErrorKind::Input, "sentiment", "load_oracle", path.display().to_string(), e)
        })?;
        diag.unmatched_responses = provider.unmatched_responses();
        build_panel(&news, &provider, &calendar, s.signed_transform)?
    } else {
        let kind = s
            .provider
            .or_else(|| {
                news.records().iter().find_map(|r| match &r.payload {
                    NewsPayload::Score { provider, .. } => *provider,
                    NewsPayload::Text(_) => None,
                })
            })
            .ok_or_else(|| PipelineError::config("provider", "news scores carry no provider; set provider"))?;
        build_panel(&news, &PrecomputedProvider::new(kind), &calendar, s.signed_transform)?
    };
    diag.factor_values_off_calendar = dropped;
    diag.factor_values = panel.len();
    Ok(panel)
}

/// What [`run`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: BacktestReport,
    pub diagnostics: RunDiagnostics,
    pub files: Vec<PathBuf>,
}

fn csv_series(dates: &[chrono::NaiveDate], header: &[String], columns: &[Vec<f64>], out: &mut Vec<u8>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (i, d) in dates.iter().enumerate() {
        let mut row = vec![d.format("%Y-%m-%d").to_string()];
        row.extend(columns.iter().map(|c| format!("{}", c[i])));
        w.write_record(&row)?;
    }
    w.flush()
}

/// Runs the full pipeline and writes every artifact into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    let started = Instant::now();
    let inputs = digest_inputs(cfg)?;
    let mut diag = RunDiagnostics::default();
    let panel = score_panel(cfg, &mut diag)?;

    let s = &cfg.settings;
    let (prices_path, calendar_path, bench_path) =
        (cfg.resolve(&s.prices), cfg.resolve(&s.calendar), cfg.resolve(&s.benchmark));
    let prices = load_prices(&prices_path, &calendar_path, &bench_path, cfg.load_options())
        .map_err(|e| ingest_err("load_prices", &prices_path, e))?;
    diag.price_rows_read = prices.rows_read;
    diag.price_rows_skipped = prices.skipped.len();
    diag.price_rows_synthesized = prices.data.synthesized();
    let prices = prices.data;

    let analysis = analyze(&panel, &prices, &cfg.backtest, s.carry_forward_days, &cfg.metrics_config())?;
    for l in &analysis.run.ledgers {
        diag.buys_below_one_lot += l.diagnostics.buys_below_one_lot;
        diag.buys_cut_by_turnover_cap += l.diagnostics.buys_cut_by_turnover_cap;
        diag.sells_cut_by_turnover_cap += l.diagnostics.sells_cut_by_turnover_cap;
    }
    let report = BacktestReport {
        factor_name: s.factor_name.clone(),
        metrics: analysis.metrics.clone(),
        group_final_excess: analysis.groups.final_values(),
    };

    let ledgers = &analysis.run.ledgers;
    let rt = |e: crate::metrics::MetricsError| PipelineError::new(ErrorKind::Runtime, "metrics", "return_series", "", e);
    let port = portfolio_returns(ledgers).map_err(rt)?;
    let bench = benchmark_returns(ledgers).map_err(rt)?;
    let excess = excess_return_series(&port, &bench).map_err(rt)?;

    let mut out = OutputSet::new(out_dir);
    out.add(REPORT_JSON, |b| {
        b.extend(report.to_json().into_bytes());
        Ok(())
    })?;
    out.add(REPORT_CSV, |b| ComparisonTable { rows: vec![report.row()] }.write_csv(b))?;
    out.add("ledger.csv", |b| write_ledger_csv(ledgers, b))?;
    out.add("nav.csv", |b| write_nav_csv(ledgers, &prices, b))?;
    out.add("series.csv", |b| {
        let header: Vec<String> = [
            "date",
            "portfolio_return",
            "benchmark_return",
            "excess_return",
            "cumulative_net_return",
            "cumulative_excess_return",
        ]
        .map(String::from)
        .to_vec();
        let cols = vec![
            port.returns().to_vec(),
            bench.returns().to_vec(),
            excess.returns().to_vec(),
            port.cumulative(),
            excess.cumulative(),
        ];
        csv_series(port.dates(), &header, &cols, b)
    })?;
    out.add("groups.csv", |b| {
        let mut header = vec!["date".to_string()];
        header.extend((1..=analysis.groups.curves.len()).map(|g| format!("group_{g}")));
        csv_series(&analysis.groups.dates, &header, &analysis.groups.curves, b)
    })?;
    out.add(FACTOR_PANEL_FILE, |b| panel.write_csv(b))?;
    out.add("diagnostics.json", |b| {
        serde_json::to_writer_pretty(&mut *b, &diag)?;
        b.push(b'\n');
        Ok(())
    })?;
    let files = out.commit(manifest_for(cfg, "run", inputs, started))?;
    Ok(RunOutcome {
        report,
        diagnostics: diag,
        files,
    })
}

/// Scores news and exports the factor panel without back-testing.
pub fn score(cfg: &RunConfig, out_dir: &Path) -> Result<(FactorPanel, Vec<PathBuf>), PipelineError> {
    let started = Instant::now();
    let mut inputs = digest_inputs(cfg)?;
    inputs.retain(|k, _| k != "prices" && k != "benchmark");
    let mut diag = RunDiagnostics::default();
    let panel = score_panel(cfg, &mut diag)?;
    let mut out = OutputSet::new(out_dir);
    out.add(FACTOR_PANEL_FILE, |b| panel.write_csv(b))?;
    out.add("diagnostics.json", |b| {
        serde_json::to_writer_pretty(&mut *b, &diag)?;
        b.push(b'\n');
        Ok(())
    })?;
    let files = out.commit(manifest_for(cfg, "score", inputs, started))?;
    Ok((panel, files))
}
