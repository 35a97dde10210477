import math

import numpy as np
import pytest

from covdenoise import (
    DataError,
    PricePanel,
    clean_panel,
    clean_panel_report,
    load_prices,
    load_returns,
    log_returns,
    write_prices,
    write_returns,
)
from covdenoise.ingest import read_exclusions


def write_csv(path, text):
    path.write_text(text)
    return path


def test_load_minimal_panel(tmp_path):
    path = write_csv(tmp_path / "p.csv", "date,AAA\n2024-01-01,10.0\n2024-01-02,11.0\n")
    panel = load_prices(path)
    assert panel.symbols == ("AAA",)
    assert panel.dates == ("2024-01-01", "2024-01-02")
    assert np.allclose(panel.prices[:, 0], [10.0, 11.0])


def test_load_rejects_zero_price(tmp_path):
    path = write_csv(tmp_path / "p.csv", "date,AAA\n2024-01-01,0\n2024-01-02,1\n")
    with pytest.raises(DataError, match="row 2"):
        load_prices(path)


def test_load_rejects_nan_text(tmp_path):
    path = write_csv(tmp_path / "p.csv", "date,AAA\n2024-01-01,NaN\n2024-01-02,1\n")
    with pytest.raises(DataError, match="column 2"):
        load_prices(path)


def test_load_rejects_duplicates_and_bad_dates(tmp_path):
    dup_date = write_csv(tmp_path / "a.csv", "date,A\n2024-01-01,1\n2024-01-01,2\n")
    with pytest.raises(DataError, match="duplicate date"):
        load_prices(dup_date)
    dup_symbol = write_csv(tmp_path / "b.csv", "date,A,A\n2024-01-01,1,2\n2024-01-02,1,2\n")
    with pytest.raises(DataError, match="duplicate symbol"):
        load_prices(dup_symbol)
    bad_date = write_csv(tmp_path / "c.csv", "date,A\n01/02/2024,1\n2024-01-02,1\n")
    with pytest.raises(DataError, match="malformed date"):
        load_prices(bad_date)


def test_price_roundtrip_with_missing_cells(tmp_path):
    text = "date,AAA,BBB\n2024-01-01,10.25,3.5\n2024-01-02,,3.625\n2024-01-03,10.5,\n"
    path = write_csv(tmp_path / "p.csv", text)
    panel = load_prices(path)
    out = tmp_path / "copy.csv"
    write_prices(panel, out)
    again = load_prices(out)
    assert again.dates == panel.dates and again.symbols == panel.symbols
    assert np.array_equal(np.isnan(again.prices), np.isnan(panel.prices))
    mask = ~np.isnan(panel.prices)
    assert np.array_equal(again.prices[mask], panel.prices[mask])


def make_panel(columns, days=100):
    dates = tuple(f"2024-{1 + d // 28:02d}-{1 + d % 28:02d}" for d in range(days))
    symbols = tuple(columns)
    data = np.column_stack([columns[s] for s in columns])
    return PricePanel(dates=dates, symbols=symbols, prices=data)


def test_clean_drops_gappy_symbol():
    days = 100
    good = np.full(days, 50.0)
    gappy = np.full(days, 20.0)
    gappy[10:15] = np.nan  # 5% missing
    panel = make_panel({"GOOD": good, "GAPPY": gappy}, days)
    cleaned, summary = clean_panel_report(panel, missing_threshold=0.01, volatility_quantile=0.0)
    assert cleaned.symbols == ("GOOD",)
    assert summary == {"missing": 1, "volatility": 0, "excluded": 0}


def test_clean_forward_fills_small_gaps():
    days = 100
    series = np.linspace(100.0, 110.0, days)
    column = series.copy()
    column[50] = np.nan
    panel = make_panel({"AAA": column}, days)
    cleaned = clean_panel(panel, missing_threshold=0.05, volatility_quantile=0.0)
    assert cleaned.prices[50, 0] == cleaned.prices[49, 0]
    assert not np.any(np.isnan(cleaned.prices))


def test_clean_drops_leading_gap_symbol():
    days = 60
    column = np.full(days, 10.0)
    column[0] = np.nan
    panel = make_panel({"LATE": column, "OK": np.full(days, 5.0)}, days)
    cleaned = clean_panel(panel, missing_threshold=0.5, volatility_quantile=0.0)
    assert cleaned.symbols == ("OK",)


def test_clean_volatility_rule_drops_ceiling_count(rng):
    days = 200
    columns = {}
    for i in range(10):
        noise = rng.standard_normal(days) * (0.001 * (i + 1))
        columns[f"S{i:02d}"] = 100.0 * np.exp(np.cumsum(noise))
    panel = make_panel(columns, days)
    cleaned = clean_panel(panel, missing_threshold=1.0, volatility_quantile=0.10)
    assert len(cleaned.symbols) == 9
    assert "S09" not in cleaned.symbols  # the highest-volatility series


def test_clean_exclusions_and_missing_warning():
    days = 50
    panel = make_panel({"AAA": np.full(days, 1.0), "BBB": np.full(days, 2.0)}, days)
    with pytest.warns(UserWarning, match="GHOST"):
        cleaned = clean_panel(panel, 1.0, 0.0, exclusions=["BBB", "GHOST"])
    assert cleaned.symbols == ("AAA",)


def test_clean_idempotent_without_volatility_rule(rng):
    days = 120
    columns = {
        "AAA": 10.0 * np.exp(np.cumsum(rng.standard_normal(days) * 0.01)),
        "BBB": 20.0 * np.exp(np.cumsum(rng.standard_normal(days) * 0.02)),
    }
    columns["AAA"][30:32] = np.nan
    panel = make_panel(columns, days)
    once = clean_panel(panel, missing_threshold=0.05, volatility_quantile=0.0)
    twice = clean_panel(once, missing_threshold=0.05, volatility_quantile=0.0)
    assert twice.symbols == once.symbols
    assert np.array_equal(twice.prices, once.prices)


def test_clean_symbol_count_monotone(rng):
    days = 150
    columns = {}
    for i in range(8):
        series = 10.0 * np.exp(np.cumsum(rng.standard_normal(days) * 0.01))
        if i % 3 == 0:
            series[20:20 + 2 * i] = np.nan
        columns[f"S{i}"] = series
    panel = make_panel(columns, days)
    loose = len(clean_panel(panel, 0.2, 0.0).symbols)
    tight = len(clean_panel(panel, 0.01, 0.0).symbols)
    assert tight <= loose
    fewer = len(clean_panel(panel, 0.2, 0.0, exclusions=["S1"]).symbols)
    assert fewer <= loose


def test_clean_rejects_empty_result():
    days = 30
    column = np.full(days, np.nan)
    column[0] = 1.0
    panel = make_panel({"A": column}, days)
    with pytest.raises(DataError, match="every symbol"):
        clean_panel(panel, missing_threshold=0.01, volatility_quantile=0.0)


def test_log_returns_basics():
    days = 5
    panel = make_panel({"FLAT": np.full(days, 7.0)}, days)
    returns = log_returns(panel)
    assert np.allclose(returns.values, 0.0)
    assert returns.n_dates == days - 1

    doubling = make_panel({"UP": 2.0 ** np.arange(days)}, days)
    assert np.allclose(log_returns(doubling).values, math.log(2.0))


def test_log_returns_hand_case():
    panel = make_panel({"A": np.array([100.0, 110.0, 99.0])}, 3)
    returns = log_returns(panel)
    assert np.allclose(returns.values[0], [math.log(1.1), math.log(0.9)])


def test_log_returns_requires_clean_panel():
    column = np.array([1.0, np.nan, 2.0])
    panel = make_panel({"A": column}, 3)
    with pytest.raises(DataError, match="missing"):
        log_returns(panel)


def test_log_returns_reexponentiate(rng):
    days = 40
    series = 10.0 * np.exp(np.cumsum(rng.standard_normal(days) * 0.05))
    panel = make_panel({"A": series}, days)
    returns = log_returns(panel)
    assert np.isclose(np.exp(returns.values[0].sum()), series[-1] / series[0], rtol=1e-10)


def test_returns_roundtrip(tmp_path, rng):
    days = 20
    panel = make_panel({"A": np.exp(rng.standard_normal(days) * 0.01 + 2),
                        "B": np.exp(rng.standard_normal(days) * 0.01 + 3)}, days)
    returns = log_returns(panel)
    path = tmp_path / "r.csv"
    write_returns(returns, path)
    loaded = load_returns(path)
    assert loaded.symbols == returns.symbols
    assert loaded.dates == returns.dates
    assert np.array_equal(loaded.values, returns.values)


def test_read_exclusions(tmp_path):
    path = tmp_path / "ex.txt"
    path.write_text("# stable coins\nUSDT\n\nEURS\n")
    assert read_exclusions(path) == ["USDT", "EURS"]
