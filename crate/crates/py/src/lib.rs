//! Python bindings for the back-testing toolkit.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use sentibench_core::engine;
use sentibench_core::fixture::{self, FixtureSpec};
use sentibench_core::metrics;
use sentibench_core::model::{self, MarketTimestamp, Price, WindowTrade};
use sentibench_core::pipeline::{self, RunConfig};
use sentibench_core::report::{self, BacktestReport, OutputFormat};
use sentibench_core::sentiment::{self, DiscreteLabel, Scale};

create_exception!(sentibench, SentibenchError, PyException);

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err(e: impl ToString) -> PyErr {
    SentibenchError::new_err(e.to_string())
}

/// Canonical form of a stock id such as `"SSE:600519"`.
#[pyfunction]
pub fn parse_stock_id(raw: &str) -> PyResult<String> {
    model::parse_stock_id(raw).map(|s| s.to_string()).map_err(value_err)
}

/// Whether an ISO-8601 timestamp falls strictly before the 09:30 open.
#[pyfunction]
pub fn is_pre_open(timestamp: &str) -> PyResult<bool> {
    let ts: MarketTimestamp = timestamp.parse().map_err(value_err)?;
    Ok(ts.is_pre_open())
}

/// Signed score of a discrete label: GOOD/POSITIVE, NOT SURE/NEUTRAL, BAD/NEGATIVE.
#[pyfunction]
pub fn map_discrete(label: &str) -> PyResult<f64> {
    let normalized = label.trim().to_ascii_uppercase().replace('_', " ");
    let parsed = match normalized.as_str() {
        "GOOD" | "GOOD NEWS" => Some(DiscreteLabel::Good),
        "NOT SURE" => Some(DiscreteLabel::NotSure),
        "BAD" | "BAD NEWS" => Some(DiscreteLabel::Bad),
        _ => DiscreteLabel::parse_class(label),
    };
    let label = parsed.ok_or_else(|| value_err(format!("unknown label {label:?}")))?;
    Ok(sentiment::map_discrete(label).value())
}

#[pyfunction]
pub fn wrap_continuous(p_positive: f64) -> PyResult<f64> {
    sentiment::wrap_continuous(p_positive).map(|s| s.value()).map_err(value_err)
}

/// Moves a value from `scale` (`"unit"` or `"signed"`) onto the signed scale.
#[pyfunction]
#[pyo3(signature = (value, scale = "unit"))]
pub fn to_signed(value: f64, scale: &str) -> PyResult<f64> {
    let scale = match scale {
        "unit" => Scale::Unit,
        "signed" => Scale::Signed,
        other => return Err(value_err(format!("unknown scale {other:?}"))),
    };
    if !scale.contains(value) {
        return Err(value_err(format!("{value} outside the {scale} scale")));
    }
    Ok(scale.to_signed_value(value))
}

/// Verdict of a free-text model reply: `"good"`, `"bad"` or `"not_sure"`.
#[pyfunction]
pub fn parse_prompt_response(raw: &str) -> &'static str {
    match sentiment::parse_prompt_response(raw) {
        DiscreteLabel::Good | DiscreteLabel::Positive => "good",
        DiscreteLabel::Bad | DiscreteLabel::Negative => "bad",
        DiscreteLabel::NotSure | DiscreteLabel::Neutral => "not_sure",
    }
}

/// Exact VWAP of `(price, volume)` prints. Prices are taken at 4 decimals.
#[pyfunction]
pub fn compute_vwap(window: Vec<(String, u64)>) -> PyResult<f64> {
    let trades = window
        .into_iter()
        .map(|(p, volume)| {
            Ok(WindowTrade {
                price: p.parse::<Price>().map_err(value_err)?,
                volume,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    engine::compute_vwap(&trades).map(|v| v.value()).map_err(value_err)
}

#[pyfunction]
pub fn daily_returns(nav: Vec<f64>) -> PyResult<Vec<f64>> {
    metrics::daily_returns(&nav).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (returns, days_per_year = metrics::DEFAULT_DAYS_PER_YEAR))]
pub fn annualize(returns: Vec<f64>, days_per_year: u32) -> f64 {
    metrics::annualize(&returns, days_per_year)
}

#[pyfunction]
pub fn win_rate(returns: Vec<f64>) -> f64 {
    metrics::win_rate(&returns)
}

#[pyfunction]
#[pyo3(signature = (returns, risk_free_annual = 0.0, days_per_year = metrics::DEFAULT_DAYS_PER_YEAR))]
pub fn sharpe(returns: Vec<f64>, risk_free_annual: f64, days_per_year: u32) -> PyResult<f64> {
    metrics::sharpe(&returns, risk_free_annual, days_per_year).map_err(value_err)
}

#[pyfunction]
pub fn max_drawdown(nav: Vec<f64>) -> f64 {
    metrics::max_drawdown(&nav)
}

/// Writes a synthetic dataset and config into `out`; returns the file paths.
#[pyfunction]
#[pyo3(signature = (out, seed, stocks, days, plant_corr = 0.0))]
pub fn gen_fixture(out: PathBuf, seed: u64, stocks: usize, days: usize, plant_corr: f64) -> PyResult<Vec<String>> {
    let fx = fixture::generate(&FixtureSpec::new(seed, stocks, days, plant_corr)).map_err(value_err)?;
    let files = fixture::write_fixture(&fx, &out).map_err(run_err)?;
    Ok(files.iter().map(|p| p.display().to_string()).collect())
}

/// Metrics of one back-test run.
#[pyclass(frozen, name = "Report")]
pub struct PyReport {
    inner: BacktestReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn factor_name(&self) -> &str {
        &self.inner.factor_name
    }

    #[getter]
    fn annual_excess_return(&self) -> f64 {
        self.inner.metrics.annual_excess_return
    }

    #[getter]
    fn annual_net_asset_return(&self) -> f64 {
        self.inner.metrics.annual_net_asset_return
    }

    #[getter]
    fn win_rate(&self) -> f64 {
        self.inner.metrics.win_rate
    }

    #[getter]
    fn sharpe_ratio(&self) -> f64 {
        self.inner.metrics.sharpe_ratio
    }

    #[getter]
    fn max_drawdown(&self) -> f64 {
        self.inner.metrics.max_drawdown
    }

    #[getter]
    fn avg_stocks_held(&self) -> f64 {
        self.inner.metrics.avg_stocks_held
    }

    #[getter]
    fn turnover_ratio(&self) -> f64 {
        self.inner.metrics.turnover_ratio
    }

    #[getter]
    fn trading_days(&self) -> usize {
        self.inner.metrics.trading_days
    }

    #[getter]
    fn group_final_excess(&self) -> Vec<f64> {
        self.inner.group_final_excess.clone()
    }

    /// Table columns, factor name first.
    #[staticmethod]
    fn columns() -> Vec<&'static str> {
        report::columns()
    }

    /// Formatted table cells matching [`Report.columns`].
    pub fn row(&self) -> Vec<String> {
        self.inner.row().cells()
    }

    pub fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(factor_name={:?}, annual_excess_return={:.2}, sharpe_ratio={:.4})",
            self.inner.factor_name, self.inner.metrics.annual_excess_return, self.inner.metrics.sharpe_ratio
        )
    }
}

/// Runs the pipeline described by a TOML config, writing artifacts to `out`.
#[pyfunction]
pub fn run(config: PathBuf, out: PathBuf) -> PyResult<PyReport> {
    let cfg = RunConfig::load(&config).map_err(run_err)?;
    let outcome = pipeline::run(&cfg, &out).map_err(run_err)?;
    Ok(PyReport { inner: outcome.report })
}

/// Reads the report written by a previous run.
#[pyfunction]
pub fn load_report(dir: PathBuf) -> PyResult<PyReport> {
    BacktestReport::read(&dir).map(|inner| PyReport { inner }).map_err(run_err)
}

/// Comparison table of several runs, rendered as text, csv or json.
#[pyfunction]
#[pyo3(signature = (dirs, format = "text"))]
pub fn compare(dirs: Vec<PathBuf>, format: &str) -> PyResult<String> {
    let format: OutputFormat = format.parse().map_err(value_err)?;
    report::compare(&dirs).map(|t| t.render(format)).map_err(run_err)
}

#[pymodule]
fn sentibench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SentibenchError", m.py().get_type::<SentibenchError>())?;
    m.add("__version__", pipeline::TOOL_VERSION)?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(parse_stock_id, m)?)?;
    m.add_function(wrap_pyfunction!(is_pre_open, m)?)?;
    m.add_function(wrap_pyfunction!(map_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(wrap_continuous, m)?)?;
    m.add_function(wrap_pyfunction!(to_signed, m)?)?;
    m.add_function(wrap_pyfunction!(parse_prompt_response, m)?)?;
    m.add_function(wrap_pyfunction!(compute_vwap, m)?)?;
    m.add_function(wrap_pyfunction!(daily_returns, m)?)?;
    m.add_function(wrap_pyfunction!(annualize, m)?)?;
    m.add_function(wrap_pyfunction!(win_rate, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe, m)?)?;
    m.add_function(wrap_pyfunction!(max_drawdown, m)?)?;
    m.add_function(wrap_pyfunction!(gen_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(load_report, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
