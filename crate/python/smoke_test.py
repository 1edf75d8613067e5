"""Smoke test for the sentibench Python bindings.

Build and install the extension first:

    pip install --no-build-isolation -e crates/py
"""

import json
import math
import sys
import tempfile
from pathlib import Path

import sentibench


def check(label, cond):
    print(("ok   " if cond else "FAIL ") + label)
    return cond


def main():
    results = []
    results.append(check("parse_stock_id", sentibench.parse_stock_id("SSE:600519") == "SSE:600519"))
    try:
        sentibench.parse_stock_id("SSE:60051")
        results.append(check("malformed stock id rejected", False))
    except ValueError:
        results.append(check("malformed stock id rejected", True))
    results.append(check("pre-open 09:29", sentibench.is_pre_open("2022-03-15T09:29:00+08:00")))
    results.append(check("open 09:30 excluded", not sentibench.is_pre_open("2022-03-15T09:30:00+08:00")))
    results.append(check("GOOD -> 1", sentibench.map_discrete("GOOD NEWS") == 1.0))
    results.append(check("Negative -> -1", sentibench.map_discrete("negative") == -1.0))
    results.append(check("wrap 0.9833", sentibench.wrap_continuous(0.9833) == 0.9833))
    results.append(check("to_signed 0.5", sentibench.to_signed(0.5) == 0.0))
    results.append(check("prompt parsing", sentibench.parse_prompt_response("the outlook is mixed") == "not_sure"))
    results.append(check("vwap", sentibench.compute_vwap([("10.00", 100), ("11.00", 300)]) == 10.75))
    results.append(check("drawdown", math.isclose(sentibench.max_drawdown([1.0, 1.2, 0.9, 1.1]), 0.25)))
    results.append(check("win rate", sentibench.win_rate([0.1, 0.2, 0.3, -0.1]) == 75.0))

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        sentibench.gen_fixture(str(tmp / "fx"), seed=42, stocks=5, days=10, plant_corr=0.5)
        a = sentibench.run(str(tmp / "fx" / "config.toml"), str(tmp / "a"))
        b = sentibench.run(str(tmp / "fx" / "config.toml"), str(tmp / "b"))
        results.append(check("run produces 10 days", a.trading_days == 10))
        results.append(check("rerun is identical", a.row() == b.row()))
        results.append(check("report columns", sentibench.Report.columns()[-1] == "Turn-over Ratio (%)"))
        table = json.loads(sentibench.compare([str(tmp / "a"), str(tmp / "b")], format="json"))
        results.append(check("compare has two rows", len(table["rows"]) == 2))
        try:
            sentibench.compare([str(tmp / "a"), str(tmp / "fx")])
            results.append(check("missing report detected", False))
        except sentibench.SentibenchError as e:
            results.append(check("missing report detected", "fx" in str(e)))
        print(a)

    passed = sum(results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
