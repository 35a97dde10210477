"""Walk-forward (rolling-window) backtesting: estimate in-sample, allocate
long-only minimum variance, hold out-of-sample, rebalance, aggregate metrics.

Weights drift with prices inside each hold period (no daily renormalization);
turnover is measured between the drifted weights and the next target
allocation.  Nothing after a rebalance boundary ever enters that rebalance's
estimate, so the engine is free of look-ahead by construction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .covariance import CovarianceMatrix, symmetrize
from .errors import CovDenoiseError, DataError, ParameterError
from .estimators import TRAINED_COVARIANCE, TRAINED_EIGENVECTOR, ESTIMATOR_NAMES, make_estimator
from .ingest import ReturnsPanel
from .portfolio import PerformanceMetrics, WeightVector, mvp_plus_weights, portfolio_metrics
from .spectral import cov_to_corr, invert_permutation, spectral_seriation

RETURN_MODES = ("simple", "log")


@dataclass(frozen=True)
class WalkForwardConfig:
    split_date: str
    estimator: str = "naive"
    t_in: int = 182
    t_out: int = 182
    delta_t: int = 182
    return_mode: str = "simple"
    denoiser_config: Any = None
    train_window_count: int = 100
    train_stride: int = 1
    pre_history_days: int = 282
    seriation_per_window: bool = True
    periods_per_year: int = 365

    def __post_init__(self) -> None:
        if self.t_in < 2 or self.t_out < 2 or self.delta_t < 2:
            raise ParameterError("t_in, t_out and delta_t must all be >= 2")
        if self.estimator not in ESTIMATOR_NAMES:
            raise ParameterError(
                f"unknown estimator {self.estimator!r}; expected one of {ESTIMATOR_NAMES}"
            )
        if self.return_mode not in RETURN_MODES:
            raise ParameterError(f"return_mode must be one of {RETURN_MODES}")
        if self._needs_training() and self.train_window_count < 2:
            raise ParameterError("trained estimators need train_window_count >= 2")
        if self.train_stride < 1 or self.pre_history_days < 0:
            raise ParameterError("train_stride must be >= 1 and pre_history_days >= 0")

    def _needs_training(self) -> bool:
        return self.estimator in TRAINED_COVARIANCE + TRAINED_EIGENVECTOR


@dataclass
class BacktestReport:
    rebalance_dates: list[str]
    weight_history: list[WeightVector]
    daily_dates: list[str]
    daily_returns: np.ndarray
    metrics: PerformanceMetrics
    symbols: tuple[str, ...]
    diagnostics: list[dict] = field(default_factory=list)


def _split_index(panel: ReturnsPanel, split_date: str) -> int:
    for index, date in enumerate(panel.dates):
        if date >= split_date:
            return index
    raise ParameterError(f"split date {split_date} is after the panel's last date")


def _rebalance_count(available: int, t_out: int, delta_t: int) -> int:
    if available < t_out:
        raise ParameterError(
            f"only {available} out-of-sample days available but one window needs {t_out}"
        )
    return (available - t_out) // delta_t + 1


def _window_covariance(window: np.ndarray) -> CovarianceMatrix:
    cov = symmetrize(window @ window.T / window.shape[1])
    if np.any(np.diag(cov) <= 0.0):
        raise DataError("degenerate variance: an asset has zero variance in-sample")
    return CovarianceMatrix(cov, "sample")


def _hold_period(
    weights: np.ndarray, window: np.ndarray, mode: str
) -> tuple[np.ndarray, np.ndarray]:
    """Daily portfolio simple returns over a hold window plus drifted weights."""
    if mode == "log":
        portfolio = np.exp(weights @ window) - 1.0
        return portfolio, weights.copy()
    growth = np.exp(window)  # price relatives by asset and day
    holdings = weights.copy()
    out = np.empty(window.shape[1])
    for day in range(window.shape[1]):
        value = holdings * growth[:, day]
        total = value.sum()
        out[day] = total - 1.0
        holdings = value / total
    return out, holdings


def _train_window_weights(config: WalkForwardConfig, training_block: np.ndarray):
    from .denoiser import build_training_set_rolling, train

    mode = "covariance" if config.estimator in TRAINED_COVARIANCE else "eigenvectors"
    if config.denoiser_config is None:
        raise ParameterError(f"estimator {config.estimator!r} requires a denoiser configuration")
    data = build_training_set_rolling(
        training_block,
        window_length=config.t_in,
        count=config.train_window_count,
        stride=config.train_stride,
        mode=mode,
    )
    return train(replace(config.denoiser_config, mode=mode), data)


def walk_forward(panel: ReturnsPanel, config: WalkForwardConfig) -> BacktestReport:
    """Run the rolling estimate/allocate/hold loop over the panel."""
    split = _split_index(panel, config.split_date)
    needs_training = config._needs_training()
    history_needed = config.t_in + (config.pre_history_days if needs_training else 0)
    if split < history_needed:
        raise ParameterError(
            f"insufficient history before the split date: have {split} days, "
            f"need {history_needed} ({history_needed - split} more)"
        )
    count = _rebalance_count(panel.n_dates - split, config.t_out, config.delta_t)

    weight_history: list[WeightVector] = []
    pre_rebalance: list[np.ndarray] = []
    rebalance_dates: list[str] = []
    daily_returns: list[np.ndarray] = []
    daily_dates: list[str] = []
    diagnostics: list[dict] = []
    drifted: np.ndarray | None = None

    for k in range(count):
        boundary = split + k * config.delta_t
        in_sample = panel.values[:, boundary - config.t_in:boundary]
        order = None
        if needs_training and config.seriation_per_window:
            corr, _ = cov_to_corr(_window_covariance(in_sample))
            order = spectral_seriation(corr)
        window_diag: dict = {"window": k, "date": panel.dates[boundary]}
        if needs_training:
            block = panel.values[:, boundary - config.t_in - config.pre_history_days:boundary]
            if order is not None:
                block = block[order, :]
            weights_net, training_history = _train_window_weights(config, block)
            window_diag["final_train_mse"] = (
                training_history.train_mse[-1] if training_history.train_mse else None
            )
            window_diag["final_validation_mse"] = (
                training_history.validation_mse[-1] if training_history.validation_mse else None
            )
            kw = (
                {"cov_weights": weights_net}
                if config.estimator in TRAINED_COVARIANCE
                else {"vec_weights": weights_net}
            )
        else:
            kw = {}
        estimator = make_estimator(config.estimator, config.t_in, **kw)
        sample = _window_covariance(in_sample if order is None else in_sample[order, :])
        eigenvalues = np.linalg.eigvalsh(sample.values)
        window_diag["in_sample_condition"] = float(
            eigenvalues[-1] / max(eigenvalues[0], 1e-300)
        )
        try:
            estimate = estimator(sample)
        except CovDenoiseError as exc:
            raise type(exc)(
                f"estimator {config.estimator!r} failed at rebalance window {k} "
                f"({panel.dates[boundary]}): {exc}"
            ) from exc
        values = estimate.values
        if order is not None:
            undo = invert_permutation(order)
            values = values[np.ix_(undo, undo)]
            estimate = CovarianceMatrix(values, estimate.provenance)
        allocation = mvp_plus_weights(estimate)
        if drifted is not None:
            pre_rebalance.append(drifted)
        weight_history.append(allocation)
        rebalance_dates.append(panel.dates[boundary])

        hold = panel.values[:, boundary:boundary + config.t_out]
        returns, drifted = _hold_period(allocation.weights, hold, config.return_mode)
        daily_returns.append(returns)
        daily_dates.extend(panel.dates[boundary:boundary + config.t_out])
        diagnostics.append(window_diag)

    series = np.concatenate(daily_returns)
    metrics = portfolio_metrics(
        series,
        [w.weights for w in weight_history],
        config.periods_per_year,
        pre_rebalance_weights=pre_rebalance,
    )
    return BacktestReport(
        rebalance_dates=rebalance_dates,
        weight_history=weight_history,
        daily_dates=daily_dates,
        daily_returns=series,
        metrics=metrics,
        symbols=panel.symbols,
        diagnostics=diagnostics,
    )


def buy_and_hold(panel: ReturnsPanel, symbol: str, config: WalkForwardConfig) -> BacktestReport:
    """Hold one asset over the same span the walk-forward engine would trade."""
    if symbol not in panel.symbols:
        raise ParameterError(f"unknown symbol {symbol!r}")
    split = _split_index(panel, config.split_date)
    count = _rebalance_count(panel.n_dates - split, config.t_out, config.delta_t)
    horizon = (count - 1) * config.delta_t + config.t_out
    column = panel.symbols.index(symbol)
    window = panel.values[column, split:split + horizon]
    returns = np.exp(window) - 1.0
    weights = np.zeros(len(panel.symbols))
    weights[column] = 1.0
    allocation = WeightVector(weights, long_only=True)
    metrics = portfolio_metrics(returns, [weights], config.periods_per_year)
    return BacktestReport(
        rebalance_dates=[panel.dates[split]],
        weight_history=[allocation],
        daily_dates=list(panel.dates[split:split + horizon]),
        daily_returns=returns,
        metrics=metrics,
        symbols=panel.symbols,
        diagnostics=[{"window": 0, "date": panel.dates[split], "symbol": symbol}],
    )


def uniform_portfolio(panel: ReturnsPanel, config: WalkForwardConfig) -> BacktestReport:
    """Equal-weight allocation re-established at every rebalance."""
    split = _split_index(panel, config.split_date)
    count = _rebalance_count(panel.n_dates - split, config.t_out, config.delta_t)
    p = len(panel.symbols)
    uniform = np.full(p, 1.0 / p)
    weight_history: list[WeightVector] = []
    pre_rebalance: list[np.ndarray] = []
    rebalance_dates: list[str] = []
    daily_returns: list[np.ndarray] = []
    daily_dates: list[str] = []
    drifted: np.ndarray | None = None
    for k in range(count):
        boundary = split + k * config.delta_t
        if drifted is not None:
            pre_rebalance.append(drifted)
        weight_history.append(WeightVector(uniform.copy(), long_only=True))
        rebalance_dates.append(panel.dates[boundary])
        hold = panel.values[:, boundary:boundary + config.t_out]
        returns, drifted = _hold_period(uniform, hold, config.return_mode)
        daily_returns.append(returns)
        daily_dates.extend(panel.dates[boundary:boundary + config.t_out])
    series = np.concatenate(daily_returns)
    metrics = portfolio_metrics(
        series,
        [w.weights for w in weight_history],
        config.periods_per_year,
        pre_rebalance_weights=pre_rebalance,
    )
    # reset-per-rebalance turnover (used in metrics) next to the target-vs-target view
    diagnostics = [
        {
            "turnover_reset_from_drift": metrics.turnover,
            "turnover_target_vs_target": 0.0,
        }
    ]
    return BacktestReport(
        rebalance_dates=rebalance_dates,
        weight_history=weight_history,
        daily_dates=daily_dates,
        daily_returns=series,
        metrics=metrics,
        symbols=panel.symbols,
        diagnostics=diagnostics,
    )


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_report_files(report: BacktestReport, out_dir) -> dict[str, Path]:
    """Emit metrics JSON, weights CSV, daily-returns CSV and wealth CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out / "metrics.json",
        "weights": out / "weights.csv",
        "returns": out / "daily_returns.csv",
        "wealth": out / "wealth.csv",
    }
    _atomic_write(paths["metrics"], report.metrics.to_json_text())
    lines = ["date," + ",".join(report.symbols)]
    for date, allocation in zip(report.rebalance_dates, report.weight_history):
        lines.append(date + "," + ",".join(repr(float(v)) for v in allocation.weights))
    _atomic_write(paths["weights"], "\n".join(lines) + "\n")
    lines = ["date,portfolio_return"]
    for date, value in zip(report.daily_dates, report.daily_returns):
        lines.append(f"{date},{float(value)!r}")
    _atomic_write(paths["returns"], "\n".join(lines) + "\n")
    wealth = np.cumprod(1.0 + report.daily_returns)
    lines = ["date,wealth"]
    for date, value in zip(report.daily_dates, wealth):
        lines.append(f"{date},{float(value)!r}")
    _atomic_write(paths["wealth"], "\n".join(lines) + "\n")
    return paths
