//! Engine-versus-reference comparison.

use sentibench_core::engine::{DailyLedger, Side};

use super::reference::{RefDay, RefTrade};

pub fn to_ref(l: &DailyLedger) -> Vec<RefTrade> {
    l.trades
        .iter()
        .map(|t| RefTrade {
            date: t.date,
            stock: t.stock,
            sell: t.side == Side::Sell,
            shares: t.shares,
            fill: t.fill_price.ticks(),
            gross: t.gross_value.ticks(),
            fee: t.fee.ticks(),
        })
        .collect()
}

/// First difference between an engine run and the reference, if any.
pub fn diff(engine: &[DailyLedger], reference: &[RefDay]) -> Result<(), String> {
    if engine.len() != reference.len() {
        return Err(format!("{} engine days vs {} reference days", engine.len(), reference.len()));
    }
    for (l, r) in engine.iter().zip(reference) {
        let got = to_ref(l);
        if l.date != r.date || got != r.trades {
            return Err(format!("{}: trades differ\n engine    {got:?}\n reference {:?}", r.date, r.trades));
        }
        let navs = (l.nav_open.ticks(), l.nav_close.ticks(), l.cash_close.ticks());
        if navs != (r.nav_open, r.nav_close, r.cash) {
            return Err(format!("{}: (nav_open, nav_close, cash) {navs:?} vs {:?}", r.date, (r.nav_open, r.nav_close, r.cash)));
        }
    }
    Ok(())
}
