use super::*;
use crate::model::{OpeningPrints, TradingCalendar};
use crate::sentiment::{ProviderKind, Scale};

fn d(day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 3, day).unwrap()
}

fn sid(raw: &str) -> StockId {
    raw.parse().unwrap()
}

fn px(raw: &str) -> Price {
    raw.parse().unwrap()
}

fn rec(stock: &str, date: NaiveDate, vwap: &str, close: &str, tradable: bool) -> DailyPriceRecord {
    DailyPriceRecord {
        stock: sid(stock),
        date,
        opening: OpeningPrints::Vwap(px(vwap)),
        close: px(close),
        tradable,
    }
}

fn dataset(dates: &[NaiveDate], records: Vec<DailyPriceRecord>) -> PriceDataset {
    let cal = TradingCalendar::new(dates.to_vec()).unwrap();
    let bench = dates.iter().map(|d| (*d, 4000.0)).collect();
    PriceDataset::new(cal, records, bench).unwrap()
}

fn signed_panel(entries: &[(&str, NaiveDate, f64)]) -> FactorPanel {
    let mut p = FactorPanel::empty(ProviderKind::DiscreteThreeClass, Scale::Signed);
    for (s, date, v) in entries {
        p.insert(sid(s), *date, *v).unwrap();
    }
    p
}

fn wt(price: &str, volume: u64) -> WindowTrade {
    WindowTrade {
        price: px(price),
        volume,
    }
}

#[test]
fn vwap_examples() {
    let v = compute_vwap(&[wt("10.00", 100), wt("11.00", 300)]).unwrap();
    assert_eq!(v.value(), 10.75);
    assert_eq!(v.fill_price(), px("10.75"));
    assert_eq!(compute_vwap(&[wt("9.50", 500)]).unwrap().fill_price(), px("9.5"));
    assert_eq!(compute_vwap(&[wt("10", 0), wt("12", 0)]), Err(EngineError::NoLiquidity));
}

#[test]
fn vwap_fill_rounds_half_even() {
    // 10.0001 * 1 + 10.0002 * 1 over 2 shares is 10.00015, which rounds to the even tick.
    let v = compute_vwap(&[wt("10.0001", 1), wt("10.0002", 1)]).unwrap();
    assert_eq!(v.fill_price(), px("10.0002"));
    let v = compute_vwap(&[wt("10.0002", 1), wt("10.0003", 1)]).unwrap();
    assert_eq!(v.fill_price(), px("10.0002"));
}

#[test]
fn zero_volume_window_is_not_tradable() {
    let mut r = rec("SSE:600000", d(1), "10", "10", true);
    r.opening = OpeningPrints::Window(vec![wt("10", 0)]);
    assert_eq!(opening_fill(&r), None);
}

#[test]
fn equal_split_reserves_fee() {
    let shares = max_affordable_shares(Money::from_units(50_000), px("10.00"), 100, "0.0015".parse().unwrap());
    assert_eq!(shares, 4_900);
    let fee: Rate = "0.0015".parse().unwrap();
    let cost = |n: u64| px("10").value_of(n) + px("10").value_of(n).mul_rate(fee);
    assert!(cost(4_900) <= Money::from_units(50_000));
    assert!(cost(5_000) > Money::from_units(50_000));
}

#[test]
fn sizing_two_buys_from_cash() {
    let ds = dataset(&[d(1)], vec![rec("SSE:600000", d(1), "10", "10", true), rec("SSE:600001", d(1), "10", "10", true)]);
    let cfg = BacktestConfig {
        initial_cash: Money::from_units(100_000),
        ..BacktestConfig::default()
    };
    let panel = signed_panel(&[("SSE:600000", d(1), 1.0), ("SSE:600001", d(1), 0.5)]);
    let run = run_backtest(&panel, &ds, &cfg).unwrap();
    let trades = &run.ledgers[0].trades;
    assert_eq!(trades.len(), 2);
    assert!(trades.iter().all(|t| t.shares == 4_900 && t.side == Side::Buy));
    assert_eq!(trades[0].fee, "73.5".parse().unwrap());
}

#[test]
fn sell_fee_and_proceeds() {
    let t = Trade::new(d(1), sid("SSE:600000"), Side::Sell, 300, px("20.00"), "0.0015".parse().unwrap());
    assert_eq!(t.gross_value, Money::from_units(6_000));
    assert_eq!(t.fee, "9".parse().unwrap());
    assert_eq!(t.gross_value - t.fee, "5991".parse().unwrap());
}

#[test]
fn turnover_cap_truncates_buy_tail() {
    // NAV 1,000,000 all cash; spending it all would be 500,000 one-sided turnover.
    let stocks: Vec<String> = (0..12).map(|i| format!("SSE:6000{i:02}")).collect();
    let records = stocks.iter().map(|s| rec(s, d(1), "10", "10", true)).collect();
    let ds = dataset(&[d(1)], records);
    let entries: Vec<(&str, NaiveDate, f64)> = stocks.iter().map(|s| (s.as_str(), d(1), 1.0)).collect();
    let panel = signed_panel(&entries);
    let market = DayMarket::from_dataset(&ds, d(1)).unwrap();
    let cfg = BacktestConfig {
        initial_cash: Money::from_units(1_000_000),
        turnover_cap: 0.4,
        ..BacktestConfig::default()
    };
    let state = PortfolioState::initial(cfg.initial_cash).at(d(1));
    let sel = select_trades(&state, &rank_daily(&panel, d(1)), &market, &cfg);
    assert_eq!(sel.buys.len(), 12);
    let sized = size_orders(&sel, &state, &market, &cfg).unwrap();
    let traded: Money = sized.trades.iter().map(|t| t.gross_value).sum();
    assert!(traded.half() <= Money::from_units(400_000));
    assert_eq!(sized.trades.len() + sized.diagnostics.buys_cut_by_turnover_cap, 12);
    assert!(sized.diagnostics.buys_cut_by_turnover_cap > 0);
    // The kept buys are the best-ranked prefix.
    assert_eq!(sized.trades.iter().map(|t| t.stock).collect::<Vec<_>>(), sel.buys[..sized.trades.len()].to_vec());
}

#[test]
fn threshold_selection() {
    let ds = dataset(
        &[d(1)],
        vec![
            rec("SSE:600000", d(1), "10", "10", true),
            rec("SSE:600001", d(1), "10", "10", true),
            rec("SSE:600002", d(1), "10", "10", true),
        ],
    );
    let mut state = PortfolioState::initial(Money::from_units(1000)).at(d(1));
    for s in ["SSE:600000", "SSE:600001", "SSE:600002"] {
        state.holdings.insert(sid(s), 100);
        state.marks.insert(sid(s), px("10"));
    }
    let panel = signed_panel(&[("SSE:600000", d(1), -1.0), ("SSE:600001", d(1), 0.0), ("SSE:600002", d(1), 1.0)]);
    let cfg = BacktestConfig {
        buy_threshold: 0.5,
        sell_threshold: -0.5,
        ..BacktestConfig::default()
    };
    let sel = select_trades(&state, &rank_daily(&panel, d(1)), &DayMarket::from_dataset(&ds, d(1)).unwrap(), &cfg);
    assert_eq!(sel.sells, vec![sid("SSE:600000")]);
    assert!(sel.buys.is_empty());
}

#[test]
fn buy_cap_keeps_top_ranked() {
    let n = 600;
    let stocks: Vec<String> = (0..n).map(|i| format!("SZSE:{:06}", i + 1)).collect();
    let records = stocks.iter().map(|s| rec(s, d(1), "1", "1", true)).collect();
    let ds = dataset(&[d(1)], records);
    let entries: Vec<(&str, NaiveDate, f64)> =
        stocks.iter().enumerate().map(|(i, s)| (s.as_str(), d(1), (i + 1) as f64 / n as f64)).collect();
    let panel = signed_panel(&entries);
    let state = PortfolioState::initial(Money::from_units(1_000_000)).at(d(1));
    let cfg = BacktestConfig::default();
    let sel = select_trades(&state, &rank_daily(&panel, d(1)), &DayMarket::from_dataset(&ds, d(1)).unwrap(), &cfg);
    assert_eq!(sel.buys.len(), 500);
    let expected: Vec<StockId> = stocks.iter().rev().take(500).map(|s| sid(s)).collect();
    assert_eq!(sel.buys, expected);
}

#[test]
fn non_tradable_candidate_excluded() {
    let ds = dataset(
        &[d(1)],
        vec![rec("SSE:600000", d(1), "10", "10", false), rec("SSE:600001", d(1), "10", "10", true)],
    );
    let panel = signed_panel(&[("SSE:600000", d(1), 1.0), ("SSE:600001", d(1), 0.5)]);
    let state = PortfolioState::initial(Money::from_units(100_000)).at(d(1));
    let sel = select_trades(
        &state,
        &rank_daily(&panel, d(1)),
        &DayMarket::from_dataset(&ds, d(1)).unwrap(),
        &BacktestConfig::default(),
    );
    assert_eq!(sel.buys, vec![sid("SSE:600001")]);
}

#[test]
fn empty_day_is_noop() {
    let ds = dataset(&[d(1)], vec![]);
    let panel = signed_panel(&[]);
    let state = PortfolioState::initial(Money::from_units(100)).at(d(1));
    let (next, ledger) = step_day(
        &state,
        &rank_daily(&panel, d(1)),
        &DayMarket::from_dataset(&ds, d(1)).unwrap(),
        &BacktestConfig::default(),
    )
    .unwrap();
    assert_eq!(next, state);
    assert!(ledger.trades.is_empty());
    assert_eq!(ledger.nav_open, ledger.nav_close);
}

#[test]
fn date_mismatch_is_protocol_violation() {
    let ds = dataset(&[d(1), d(2)], vec![]);
    let panel = signed_panel(&[]);
    let state = PortfolioState::initial(Money::from_units(100)).at(d(2));
    let err = step_day(
        &state,
        &rank_daily(&panel, d(1)),
        &DayMarket::from_dataset(&ds, d(1)).unwrap(),
        &BacktestConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, EngineError::ProtocolViolation(_)));
}

#[test]
fn buy_then_sell_trace() {
    let ds = dataset(
        &[d(1), d(2)],
        vec![rec("SSE:600000", d(1), "10", "11", true), rec("SSE:600000", d(2), "12", "12", true)],
    );
    let panel = signed_panel(&[("SSE:600000", d(1), 1.0), ("SSE:600000", d(2), -1.0)]);
    let cfg = BacktestConfig {
        buy_threshold: 0.5,
        sell_threshold: -0.5,
        initial_cash: Money::from_units(10_000),
        ..BacktestConfig::default()
    };
    let run = run_backtest(&panel, &ds, &cfg).unwrap();
    let day1 = &run.ledgers[0];
    assert_eq!(day1.trades.len(), 1);
    assert_eq!(day1.trades[0].side, Side::Buy);
    assert_eq!(day1.trades[0].shares, 900);
    // 10,000 - 9,000 - 13.5 cash, 900 shares marked at 11.
    assert_eq!(day1.nav_close, "10886.5".parse().unwrap());
    let day2 = &run.ledgers[1];
    assert_eq!(day2.trades.len(), 1);
    assert_eq!(day2.trades[0].side, Side::Sell);
    assert_eq!(day2.trades[0].fill_price, px("12"));
    assert!(run.final_state.holdings.is_empty());
    assert_eq!(run.final_state.cash, "11770.3".parse().unwrap());
}

#[test]
fn accounting_identity_on_trace() {
    let ds = dataset(
        &[d(1), d(2)],
        vec![
            rec("SSE:600000", d(1), "10", "11", true),
            rec("SSE:600001", d(1), "20", "19.5", true),
            rec("SSE:600000", d(2), "11", "11.5", true),
            rec("SSE:600001", d(2), "19", "21", true),
        ],
    );
    let panel = signed_panel(&[
        ("SSE:600000", d(1), 1.0),
        ("SSE:600000", d(2), -1.0),
        ("SSE:600001", d(2), 1.0),
    ]);
    let run = run_backtest(&panel, &ds, &BacktestConfig::default()).unwrap();
    let mut marks: BTreeMap<StockId, Price> = BTreeMap::new();
    let mut shares: BTreeMap<StockId, u64> = BTreeMap::new();
    for l in &run.ledgers {
        let market = DayMarket::from_dataset(&ds, l.date).unwrap();
        let mut pnl = Money::ZERO;
        let sold: BTreeSet<StockId> = l.sells().map(|t| t.stock).collect();
        for (s, n) in &shares {
            if !sold.contains(s) {
                pnl += market.close(*s).unwrap().value_of(*n) - marks[s].value_of(*n);
            }
        }
        for t in l.sells() {
            pnl += t.gross_value - marks[&t.stock].value_of(t.shares);
            shares.remove(&t.stock);
        }
        for t in l.buys() {
            pnl += market.close(t.stock).unwrap().value_of(t.shares) - t.gross_value;
            shares.insert(t.stock, t.shares);
        }
        assert_eq!(l.nav_close, l.nav_open + pnl - l.fees());
        marks = shares.keys().map(|s| (*s, market.close(*s).unwrap())).collect();
    }
    assert_eq!(run.ledgers[1].trades.len(), 2);
}

#[test]
fn all_suspended_keeps_cash() {
    let ds = dataset(
        &[d(1), d(2)],
        vec![rec("SSE:600000", d(1), "10", "10", false), rec("SSE:600000", d(2), "10", "10", false)],
    );
    let panel = signed_panel(&[("SSE:600000", d(1), 1.0), ("SSE:600000", d(2), 1.0)]);
    let cfg = BacktestConfig::default();
    let run = run_backtest(&panel, &ds, &cfg).unwrap();
    assert!(run.ledgers.iter().all(|l| l.trades.is_empty() && l.nav_close == cfg.initial_cash));
}

#[test]
fn empty_calendar() {
    let ds = dataset(&[], vec![]);
    let cfg = BacktestConfig::default();
    let run = run_backtest(&signed_panel(&[]), &ds, &cfg).unwrap();
    assert!(run.ledgers.is_empty());
    assert_eq!(run.final_state, PortfolioState::initial(cfg.initial_cash));
}

#[test]
fn step_error_carries_date() {
    let ds = dataset(&[d(1)], vec![]);
    let cfg = BacktestConfig {
        fee_rate: 1.5,
        ..BacktestConfig::default()
    };
    assert!(matches!(run_backtest(&signed_panel(&[]), &ds, &cfg), Err(EngineError::Config(_))));
    let panel = signed_panel(&[("SSE:600000", d(5), 1.0)]);
    assert!(matches!(
        run_backtest(&panel, &ds, &BacktestConfig::default()),
        Err(EngineError::ProtocolViolation(_))
    ));
}

#[test]
fn ledger_csv_layout() {
    let ds = dataset(&[d(1)], vec![rec("SSE:600000", d(1), "10", "11", true)]);
    let panel = signed_panel(&[("SSE:600000", d(1), 1.0)]);
    let cfg = BacktestConfig {
        initial_cash: Money::from_units(10_000),
        ..BacktestConfig::default()
    };
    let run = run_backtest(&panel, &ds, &cfg).unwrap();
    let mut buf = Vec::new();
    write_ledger_csv(&run.ledgers, &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "date,stock_id,side,shares,fill_price,gross_value,fee\n2022-03-01,SSE:600000,buy,900,10.0000,9000.0000,13.5000\n"
    );
    let mut buf = Vec::new();
    write_nav_csv(&run.ledgers, &ds, &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "date,nav_open,nav_close,benchmark_level\n2022-03-01,10000.0000,10886.5000,4000\n"
    );
}
