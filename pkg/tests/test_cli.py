import datetime as dt
import json

import numpy as np
import pytest
from click.testing import CliRunner

from covdenoise.cli import cli


@pytest.fixture
def runner():
    return CliRunner()


def make_price_csv(path, p=4, days=240, seed=11, gap_symbol=None):
    rng = np.random.default_rng(seed)
    symbols = [f"C{i:02d}" for i in range(p)]
    prices = 100.0 * np.exp(np.cumsum(rng.standard_normal((days, p)) * 0.02, axis=0))
    start = dt.date(2023, 1, 1)
    lines = ["date," + ",".join(symbols)]
    for i in range(days):
        cells = []
        for j in range(p):
            if gap_symbol == j and 10 <= i < 10 + int(days * 0.05):
                cells.append("")
            else:
                cells.append(repr(float(prices[i, j])))
        lines.append((start + dt.timedelta(days=i)).isoformat() + "," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return symbols


def test_simulate_writes_report_with_one_row_per_estimator(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["simulate", "--model", "block", "--block-sizes", "3,3", "--gamma", "0.2",
         "--n", "40", "--m", "3", "--estimators", "naive,lp", "--seed", "42",
         "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert len(lines) == 3
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["estimators"] == ["naive", "lp"]


def test_simulate_identity_population_smoke(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["simulate", "--model", "powerlaw", "--alpha", "0", "--p", "10", "--m", "1",
         "--n", "30", "--estimators", "naive", "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    assert "naive" in result.output


def test_simulate_is_deterministic(runner, tmp_path):
    args = ["simulate", "--model", "nested", "--p", "12", "--gamma", "0.1", "--n", "30",
            "--m", "4", "--estimators", "naive,alca", "--seed", "7"]
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert runner.invoke(cli, args + ["--out-dir", str(first)]).exit_code == 0
    assert runner.invoke(cli, args + ["--out-dir", str(second)]).exit_code == 0
    assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()
    assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()


def test_simulate_diagnostics_files(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["simulate", "--model", "block", "--block-sizes", "4,4", "--gamma", "0.3",
         "--n", "30", "--m", "1", "--estimators", "naive", "--out-dir", str(tmp_path),
         "--diagnostics"],
    )
    assert result.exit_code == 0, result.output
    scree = (tmp_path / "scree.csv").read_text().strip().splitlines()
    assert scree[0] == "rank,eigenvalue"
    assert len(scree) == 9
    dendro = (tmp_path / "dendrogram.csv").read_text().strip().splitlines()
    assert dendro[0] == "left,right,height,size"
    assert len(dendro) == 8  # p - 1 merges


def test_simulate_rejects_unknown_estimator(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["simulate", "--model", "nested", "--p", "5", "--gamma", "0.1", "--m", "1",
         "--estimators", "oracle", "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 2


def test_clean_reports_drop_summary(runner, tmp_path):
    source = tmp_path / "prices.csv"
    make_price_csv(source, p=5, gap_symbol=2)
    out_prices = tmp_path / "cleaned.csv"
    out_returns = tmp_path / "returns.csv"
    result = runner.invoke(
        cli,
        ["clean", "--input", str(source), "--output-prices", str(out_prices),
         "--output-returns", str(out_returns), "--volatility-quantile", "0"],
    )
    assert result.exit_code == 0, result.output
    assert "1 (missing rule)" in result.output
    assert "0 (volatility rule)" in result.output
    header = out_returns.read_text().splitlines()[0]
    assert header.count(",") == 4  # date + 4 surviving symbols


def test_clean_zero_quantile_drops_nothing_by_volatility(runner, tmp_path):
    source = tmp_path / "prices.csv"
    make_price_csv(source, p=4)
    result = runner.invoke(
        cli,
        ["clean", "--input", str(source), "--output-prices", str(tmp_path / "p.csv"),
         "--output-returns", str(tmp_path / "r.csv"), "--volatility-quantile", "0"],
    )
    assert result.exit_code == 0
    assert "0 (volatility rule)" in result.output


def test_clean_exclusion_file(runner, tmp_path):
    source = tmp_path / "prices.csv"
    symbols = make_price_csv(source, p=4)
    exclude = tmp_path / "exclude.txt"
    exclude.write_text(symbols[0] + "\n")
    out_returns = tmp_path / "r.csv"
    result = runner.invoke(
        cli,
        ["clean", "--input", str(source), "--output-prices", str(tmp_path / "p.csv"),
         "--output-returns", str(out_returns), "--volatility-quantile", "0",
         "--exclude-file", str(exclude)],
    )
    assert result.exit_code == 0, result.output
    assert symbols[0] not in out_returns.read_text().splitlines()[0]


def test_clean_missing_input_exits_2(runner, tmp_path):
    result = runner.invoke(cli, ["clean", "--input", str(tmp_path / "absent.csv")])
    assert result.exit_code == 2


def test_train_simulation_loss_curve(runner, tmp_path):
    import time

    weights = tmp_path / "w.cdnw"
    curve = tmp_path / "loss.csv"
    started = time.monotonic()
    result = runner.invoke(
        cli,
        ["train", "--source", "simulation", "--model", "block", "--block-sizes", "5,5",
         "--gamma", "0.3", "--n", "30", "--count", "12", "--net-blocks", "1",
         "--filters", "4", "--epochs", "3", "--seed", "3",
         "--weights-out", str(weights), "--loss-curve-out", str(curve)],
    )
    assert time.monotonic() - started < 60.0
    assert result.exit_code == 0, result.output
    rows = curve.read_text().strip().splitlines()
    assert rows[0] == "epoch,train_mse,validation_mse"
    assert len(rows) == 4
    values = [float(line.split(",")[1]) for line in rows[1:]]
    assert values[-1] < values[0]
    assert weights.exists()


def test_train_zero_learning_rate_flat_curve(runner, tmp_path):
    curve = tmp_path / "loss.csv"
    result = runner.invoke(
        cli,
        ["train", "--source", "simulation", "--model", "block", "--block-sizes", "4,4",
         "--gamma", "0.2", "--n", "25", "--count", "8", "--net-blocks", "1",
         "--filters", "2", "--epochs", "3", "--lr", "0",
         "--weights-out", str(tmp_path / "w.cdnw"), "--loss-curve-out", str(curve)],
    )
    assert result.exit_code == 0, result.output
    values = [float(line.split(",")[1]) for line in curve.read_text().strip().splitlines()[1:]]
    assert np.allclose(values, values[0], rtol=1e-12, atol=0.0)


def test_train_same_seed_same_weights_file(runner, tmp_path):
    args = ["train", "--source", "simulation", "--model", "nested", "--p", "6",
            "--gamma", "0.1", "--n", "20", "--count", "6", "--net-blocks", "1",
            "--filters", "2", "--epochs", "2", "--seed", "9"]
    first = tmp_path / "a.cdnw"
    second = tmp_path / "b.cdnw"
    assert runner.invoke(cli, args + ["--weights-out", str(first),
                                      "--loss-curve-out", str(tmp_path / "l1.csv")]).exit_code == 0
    assert runner.invoke(cli, args + ["--weights-out", str(second),
                                      "--loss-curve-out", str(tmp_path / "l2.csv")]).exit_code == 0
    assert first.read_bytes() == second.read_bytes()


def test_train_divergence_exits_3(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["train", "--source", "simulation", "--model", "block", "--block-sizes", "4,4",
         "--gamma", "0.2", "--n", "25", "--count", "8", "--net-blocks", "1",
         "--filters", "2", "--epochs", "8", "--lr", "1e150",
         "--weights-out", str(tmp_path / "w.cdnw"),
         "--loss-curve-out", str(tmp_path / "l.csv")],
    )
    assert result.exit_code == 3


def _returns_csv(tmp_path, runner, p=3, days=320):
    source = tmp_path / "prices.csv"
    make_price_csv(source, p=p, days=days, seed=5)
    returns = tmp_path / "returns.csv"
    assert runner.invoke(
        cli,
        ["clean", "--input", str(source), "--output-prices", str(tmp_path / "cp.csv"),
         "--output-returns", str(returns), "--volatility-quantile", "0"],
    ).exit_code == 0
    return returns


def test_backtest_metrics_row(runner, tmp_path):
    returns = _returns_csv(tmp_path, runner)
    result = runner.invoke(
        cli,
        ["backtest", "--returns", str(returns), "--split-date", "2023-04-01",
         "--t-in", "30", "--t-out", "30", "--delta-t", "30", "--estimator", "naive",
         "--out-dir", str(tmp_path / "bt")],
    )
    assert result.exit_code == 0, result.output
    metrics = json.loads((tmp_path / "bt" / "metrics.json").read_text())
    assert 0.0 <= metrics["turnover"] <= 2.0
    assert (tmp_path / "bt" / "wealth.csv").exists()


def test_backtest_golden_determinism(runner, tmp_path):
    returns = _returns_csv(tmp_path, runner)
    args = ["backtest", "--returns", str(returns), "--split-date", "2023-04-01",
            "--t-in", "30", "--t-out", "30", "--delta-t", "30", "--estimator", "lp"]
    first = tmp_path / "bt1"
    second = tmp_path / "bt2"
    assert runner.invoke(cli, args + ["--out-dir", str(first)]).exit_code == 0
    assert runner.invoke(cli, args + ["--out-dir", str(second)]).exit_code == 0
    for name in ("metrics.json", "weights.csv", "daily_returns.csv", "wealth.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_backtest_uniform_single_asset_equals_buy_and_hold(runner, tmp_path):
    returns = _returns_csv(tmp_path, runner, p=1)
    shared = ["--returns", str(returns), "--split-date", "2023-04-01",
              "--t-in", "30", "--t-out", "30", "--delta-t", "30"]
    a = tmp_path / "uniform"
    b = tmp_path / "bh"
    assert runner.invoke(cli, ["backtest", *shared, "--strategy", "uniform",
                               "--out-dir", str(a)]).exit_code == 0
    assert runner.invoke(cli, ["backtest", *shared, "--strategy", "buy-and-hold",
                               "--symbol", "C00", "--out-dir", str(b)]).exit_code == 0
    assert (a / "metrics.json").read_text() == (b / "metrics.json").read_text()


def test_backtest_requires_symbol_for_buy_and_hold(runner, tmp_path):
    returns = _returns_csv(tmp_path, runner)
    result = runner.invoke(
        cli,
        ["backtest", "--returns", str(returns), "--split-date", "2023-04-01",
         "--strategy", "buy-and-hold"],
    )
    assert result.exit_code == 2


def test_config_file_precedence(runner, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("m=2\nestimators=naive\nseed=5\n")
    out = tmp_path / "out"
    result = runner.invoke(
        cli,
        ["simulate", "--model", "nested", "--p", "6", "--gamma", "0.1", "--n", "20",
         "--m", "4", "--config", str(config), "--out-dir", str(out)],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((out / "report.json").read_text())
    assert payload["m"] == 4  # explicit flag beats the config file
    assert payload["seed"] == 5  # config beats the default


def test_config_file_rejects_unknown_key(runner, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("bogus_flag=1\n")
    result = runner.invoke(
        cli,
        ["simulate", "--model", "nested", "--p", "6", "--gamma", "0.1", "--m", "1",
         "--config", str(config), "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "bogus_flag" in result.output


def test_help_advertises_documented_defaults(runner):
    backtest_help = runner.invoke(cli, ["backtest", "--help"]).output
    for token in ("182", "282"):
        assert token in backtest_help
    train_help = runner.invoke(cli, ["train", "--help"]).output
    for token in ("0.001", "16", "10", "100", "0.2", "64", "3"):
        assert token in train_help


def test_simulate_with_trained_estimator(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["simulate", "--model", "block", "--block-sizes", "4,4", "--gamma", "0.3",
         "--n", "24", "--m", "2", "--estimators", "naive,cnn", "--seed", "2",
         "--train-count", "6", "--net-blocks", "1", "--filters", "2", "--epochs", "1",
         "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert lines[2].startswith("cnn,")


def test_simulate_threads_do_not_change_results(runner, tmp_path):
    base = ["simulate", "--model", "nested", "--p", "10", "--gamma", "0.1", "--n", "30",
            "--m", "6", "--estimators", "naive,lp", "--seed", "3"]
    serial = tmp_path / "serial"
    threaded = tmp_path / "threaded"
    assert runner.invoke(cli, base + ["--out-dir", str(serial)]).exit_code == 0
    assert runner.invoke(cli, base + ["--threads", "2", "--out-dir", str(threaded)]).exit_code == 0
    assert (serial / "report.csv").read_bytes() == (threaded / "report.csv").read_bytes()
