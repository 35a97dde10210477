"""Loss functions and the Monte Carlo evaluation harness.

The harness draws m sample covariances from a population model, applies each
configured estimator, and reports mean and standard error of the Frobenius
and minimum-variance losses per estimator.  Realizations run on independent
sub-seeds and may be evaluated on a thread pool; aggregation is by
realization index, so thread scheduling never changes the results.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .covariance import as_matrix
from .errors import CovDenoiseError, ParameterError, SingularMatrixError
from .estimators import (
    ESTIMATOR_NAMES,
    TRAINED_COVARIANCE,
    TRAINED_EIGENVECTOR,
    make_estimator,
)
from .models import ModelSpec, sample_covariance
from .randomness import STREAM_REALIZATION, child_seed

logger = logging.getLogger(__name__)

MV_EIGENVALUE_FLOOR = 1e-12


def frobenius_loss(xi, sigma) -> float:
    """(1/p) Tr[(Xi - Sigma)(Xi - Sigma)^T]."""
    xi = as_matrix(xi)
    sigma = as_matrix(sigma)
    if xi.shape != sigma.shape:
        raise ParameterError(f"dimension mismatch: {xi.shape} vs {sigma.shape}")
    diff = xi - sigma
    return float(np.sum(diff * diff) / sigma.shape[0])


def _inverse_from_spectrum(values: np.ndarray, name: str, floor_allowed: bool) -> np.ndarray:
    eigenvalues, vectors = np.linalg.eigh(values)
    top = eigenvalues[-1]
    if top <= 0.0:
        raise SingularMatrixError(f"{name} has no positive eigenvalues")
    floor = MV_EIGENVALUE_FLOOR * top
    deficient = int(np.sum(eigenvalues <= floor))
    if deficient:
        if not floor_allowed:
            raise SingularMatrixError(
                f"{name} is singular ({deficient} eigenvalues at or below {floor:.3e})"
            )
        logger.debug("mv_loss: floored %d eigenvalues of %s", deficient, name)
    clamped = np.maximum(eigenvalues, floor)
    return (vectors / clamped) @ vectors.T


def mv_loss(xi, sigma) -> float:
    """Minimum-variance loss of an estimate against the population matrix.

    Near-singular estimates are inverted after flooring eigenvalues at
    1e-12 times the largest; a singular population matrix is an error.
    """
    xi_values = as_matrix(xi)
    sigma_values = as_matrix(sigma)
    if xi_values.shape != sigma_values.shape:
        raise ParameterError(f"dimension mismatch: {xi_values.shape} vs {sigma_values.shape}")
    p = sigma_values.shape[0]
    sigma_inv = _inverse_from_spectrum(sigma_values, "sigma", floor_allowed=False)
    xi_inv = _inverse_from_spectrum(xi_values, "xi", floor_allowed=True)
    numerator = float(np.trace(sigma_inv @ xi_values @ sigma_inv)) / p
    denominator = (float(np.trace(sigma_inv)) / p) ** 2
    return numerator / denominator - 1.0 / (float(np.trace(xi_inv)) / p)


@dataclass(frozen=True)
class EstimatorRow:
    mean_f: float
    se_f: float
    mean_mv: float
    se_mv: float
    failures: int


@dataclass(frozen=True)
class MonteCarloReport:
    model: ModelSpec
    p: int
    n: int
    m: int
    seed: int
    estimators: tuple[str, ...]
    rows: dict[str, EstimatorRow]

    def to_csv_text(self) -> str:
        lines = ["estimator,mean_f,se_f,mean_mv,se_mv,failures"]
        for name in self.estimators:
            row = self.rows[name]
            lines.append(
                f"{name},{row.mean_f!r},{row.se_f!r},{row.mean_mv!r},{row.se_mv!r},{row.failures}"
            )
        return "\n".join(lines) + "\n"

    def to_json_text(self) -> str:
        payload = {
            "model": self.model.to_config(),
            "p": self.p,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "estimators": list(self.estimators),
            "rows": {
                name: {
                    "mean_f": row.mean_f,
                    "se_f": row.se_f,
                    "mean_mv": row.mean_mv,
                    "se_mv": row.se_mv,
                    "failures": row.failures,
                }
                for name, row in self.rows.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _train_harness_weights(model, n, estimators, seed, denoiser_config, train_count):
    """Train covariance/eigenvector nets once per run on seeds disjoint from
    the evaluation realizations."""
    from .denoiser import build_training_set_simulation, train

    cov_weights = vec_weights = None
    if any(name in TRAINED_COVARIANCE for name in estimators):
        config = replace(denoiser_config, mode="covariance")
        data = build_training_set_simulation(
            model, n, train_count, child_seed(seed, 10), mode="covariance"
        )
        cov_weights, _ = train(config, data)
    if any(name in TRAINED_EIGENVECTOR for name in estimators):
        config = replace(denoiser_config, mode="eigenvectors")
        data = build_training_set_simulation(
            model, n, train_count, child_seed(seed, 11), mode="eigenvectors"
        )
        vec_weights, _ = train(config, data)
    return cov_weights, vec_weights


def run_monte_carlo(
    model: ModelSpec,
    n: int,
    m: int,
    estimators: list[str],
    seed: int,
    denoiser_config=None,
    train_count: int = 100,
    threads: int = 1,
) -> MonteCarloReport:
    """Average both losses over m realizations for each estimator."""
    if m < 1:
        raise ParameterError("m must be >= 1")
    names = tuple(estimators)
    for name in names:
        if name not in ESTIMATOR_NAMES:
            raise ParameterError(f"unknown estimator {name!r}; expected one of {ESTIMATOR_NAMES}")
    needs_training = [n_ for n_ in names if n_ in TRAINED_COVARIANCE + TRAINED_EIGENVECTOR]
    if needs_training and denoiser_config is None:
        raise ParameterError(f"estimators {needs_training} require a denoiser configuration")
    sigma = model.build()
    cov_weights = vec_weights = None
    if needs_training:
        cov_weights, vec_weights = _train_harness_weights(
            model, n, names, seed, denoiser_config, train_count
        )
    bound = {
        name: make_estimator(name, n, cov_weights=cov_weights, vec_weights=vec_weights)
        for name in names
    }

    losses_f = {name: np.full(m, np.nan) for name in names}
    losses_mv = {name: np.full(m, np.nan) for name in names}

    def one_realization(index: int) -> None:
        draw = sample_covariance(sigma, n, child_seed(seed, STREAM_REALIZATION, index))
        for name in names:
            try:
                estimate = bound[name](draw.sample)
                losses_f[name][index] = frobenius_loss(estimate, sigma)
                losses_mv[name][index] = mv_loss(estimate, sigma)
            except (CovDenoiseError, np.linalg.LinAlgError):
                losses_f[name][index] = np.nan
                losses_mv[name][index] = np.nan

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one_realization, range(m)))
    else:
        for index in range(m):
            one_realization(index)

    rows = {}
    for name in names:
        f_vals = losses_f[name]
        mv_vals = losses_mv[name]
        ok = np.isfinite(f_vals) & np.isfinite(mv_vals)
        count = int(ok.sum())
        if count:
            f_ok, mv_ok = f_vals[ok], mv_vals[ok]
            se = 1.0 / np.sqrt(count)
            rows[name] = EstimatorRow(
                mean_f=float(f_ok.mean()),
                se_f=float(f_ok.std(ddof=1) * se) if count > 1 else 0.0,
                mean_mv=float(mv_ok.mean()),
                se_mv=float(mv_ok.std(ddof=1) * se) if count > 1 else 0.0,
                failures=m - count,
            )
        else:
            rows[name] = EstimatorRow(np.nan, np.nan, np.nan, np.nan, m)
    return MonteCarloReport(
        model=model, p=sigma.dim, n=n, m=m, seed=seed, estimators=names, rows=rows
    )
