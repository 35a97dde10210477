"""Training loop (Adam on MSE), training-set builders for simulated and
rolling empirical data, and eigenvector-target alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..covariance import symmetrize
from ..errors import DataError, NumericError, ParameterError
from ..models import ModelSpec, sample_covariance
from ..randomness import STREAM_SHUFFLE, STREAM_TRAINING, child_seed, generator
from ..spectral import apply_sign_convention, eigendecompose_sym
from .network import DenoiserConfig, DenoiserWeights, forward_batch, init_weights, loss_and_gradients

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainingSet:
    """Paired noisy inputs and targets, stacked (count, p, p)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if inputs.shape != targets.shape or inputs.ndim != 3:
            raise ParameterError(
                f"inputs {inputs.shape} and targets {targets.shape} must be matching stacks"
            )
        if inputs.shape[1] != inputs.shape[2]:
            raise ParameterError("training matrices must be square")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ParameterError("training data contains non-finite values")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def count(self) -> int:
        return self.inputs.shape[0]


@dataclass
class TrainingHistory:
    train_mse: list[float] = field(default_factory=list)
    validation_mse: list[float] = field(default_factory=list)


def _match_eigenvector_targets(target_vectors: np.ndarray, input_vectors: np.ndarray) -> np.ndarray:
    """Reorder target columns onto input columns by greedy max |inner product|.

    The reordered matrix is re-signed under the global convention so targets
    stay well defined no matter which column permutation the noise induced.
    """
    overlap = np.abs(target_vectors.T @ input_vectors)
    p = overlap.shape[0]
    matched = np.empty_like(target_vectors)
    used_targets = np.zeros(p, dtype=bool)
    used_inputs = np.zeros(p, dtype=bool)
    work = overlap.copy()
    for _ in range(p):
        flat = int(np.argmax(work))
        t_idx, i_idx = divmod(flat, p)
        matched[:, i_idx] = target_vectors[:, t_idx]
        used_targets[t_idx] = True
        used_inputs[i_idx] = True
        work[t_idx, :] = -1.0
        work[:, i_idx] = -1.0
    return apply_sign_convention(matched)


def build_training_set_simulation(
    model: ModelSpec, n: int, count: int, seed: int, mode: str = "covariance"
) -> TrainingSet:
    """Sample-covariance inputs (independent sub-seeds) against the population
    target; in eigenvector mode both sides are decomposed and aligned."""
    if count < 2:
        raise ParameterError("training set needs count >= 2")
    sigma = model.build()
    if mode == "covariance":
        target = sigma.values
        inputs = np.stack(
            [
                sample_covariance(sigma, n, child_seed(seed, STREAM_TRAINING, i)).sample.values
                for i in range(count)
            ]
        )
        targets = np.broadcast_to(target, inputs.shape).copy()
        return TrainingSet(inputs=inputs, targets=targets)
    if mode != "eigenvectors":
        raise ParameterError(f"unknown training mode {mode!r}")
    target_vectors = eigendecompose_sym(sigma).eigenvectors
    inputs = []
    targets = []
    for i in range(count):
        draw = sample_covariance(sigma, n, child_seed(seed, STREAM_TRAINING, i))
        vectors = eigendecompose_sym(draw.sample).eigenvectors
        inputs.append(vectors)
        targets.append(_match_eigenvector_targets(target_vectors, vectors))
    return TrainingSet(inputs=np.stack(inputs), targets=np.stack(targets))


def _window_covariance(returns: np.ndarray) -> np.ndarray:
    window = returns.shape[1]
    cov = symmetrize(returns @ returns.T / window)
    if np.any(np.diag(cov) <= 0.0):
        raise DataError("degenerate variance: a window has a zero-variance asset")
    return cov


def build_training_set_rolling(
    returns, window_length: int, count: int, stride: int = 1, mode: str = "covariance"
) -> TrainingSet:
    """Rolling covariance pairs from a returns panel.

    Each pair uses a ``window_length``-day input window and the immediately
    following non-overlapping window of equal length as its reduced-noise
    target.  Windows are anchored at the panel end: the last pair's target is
    the most recent window.
    """
    matrix = returns.values if hasattr(returns, "values") else np.asarray(returns, dtype=float)
    if count < 2:
        raise ParameterError("training set needs count >= 2")
    if stride < 1 or window_length < 2:
        raise ParameterError("window_length must be >= 2 and stride >= 1")
    length = matrix.shape[1]
    needed = 2 * window_length + (count - 1) * stride
    if length < needed:
        raise ParameterError(
            f"panel has {length} return days but {needed} are required "
            f"({count} windows of {window_length} days at stride {stride})"
        )
    inputs = []
    targets = []
    for j in range(count):
        start = length - 2 * window_length - (count - 1 - j) * stride
        left = _window_covariance(matrix[:, start:start + window_length])
        right = _window_covariance(matrix[:, start + window_length:start + 2 * window_length])
        if mode == "covariance":
            inputs.append(left)
            targets.append(right)
        elif mode == "eigenvectors":
            in_vectors = eigendecompose_sym(left).eigenvectors
            t_vectors = eigendecompose_sym(right).eigenvectors
            inputs.append(in_vectors)
            targets.append(_match_eigenvector_targets(t_vectors, in_vectors))
        else:
            raise ParameterError(f"unknown training mode {mode!r}")
    return TrainingSet(inputs=np.stack(inputs), targets=np.stack(targets))


def _normalizer(config: DenoiserConfig, inputs: np.ndarray) -> float:
    if config.mode != "covariance":
        return 1.0
    scale = float(np.mean([np.mean(np.diag(m)) for m in inputs]))
    return scale if scale > 0.0 else 1.0


def train(config: DenoiserConfig, data: TrainingSet) -> tuple[DenoiserWeights, TrainingHistory]:
    """Adam on MSE with a chronological validation split; returns the final
    weights and the per-epoch loss curves."""
    minimum = math.ceil(1.0 / (1.0 - config.validation_fraction))
    if data.count < minimum:
        raise ParameterError(f"training set needs at least {minimum} samples, got {data.count}")
    if data.inputs.shape[1] != config.input_size:
        raise ParameterError(
            f"training matrices are {data.inputs.shape[1]}x{data.inputs.shape[2]} "
            f"but the configuration expects {config.input_size}"
        )
    n_val = int(math.floor(data.count * config.validation_fraction))
    n_train = data.count - n_val
    if n_train < 1:
        raise ParameterError("validation split leaves an empty training set")

    weights = init_weights(config)
    weights.normalizer = _normalizer(config, data.inputs[:n_train])
    scale = weights.normalizer
    inputs = data.inputs[:, None, :, :] / scale
    targets = data.targets[:, None, :, :] / scale
    train_x, train_t = inputs[:n_train], targets[:n_train]
    val_x, val_t = inputs[n_train:], targets[n_train:]

    params = weights.tensors()
    adam_m = [np.zeros_like(t) for t in params]
    adam_v = [np.zeros_like(t) for t in params]
    step = 0
    history = TrainingHistory()
    for epoch in range(config.epochs):
        order = generator(config.seed, STREAM_SHUFFLE, epoch).permutation(n_train)
        epoch_loss = 0.0
        for start in range(0, n_train, config.batch_size):
            batch = order[start:start + config.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_gradients(weights, train_x[batch], train_t[batch])
            if not np.isfinite(loss):
                raise NumericError(f"training diverged: non-finite loss at epoch {epoch}")
            epoch_loss += loss * batch.size
            step += 1
            lr_t = config.learning_rate * math.sqrt(1.0 - ADAM_BETA2 ** step) / (
                1.0 - ADAM_BETA1 ** step
            )
            for tensor, grad, m, v in zip(params, grads, adam_m, adam_v):
                m *= ADAM_BETA1
                m += (1.0 - ADAM_BETA1) * grad
                v *= ADAM_BETA2
                v += (1.0 - ADAM_BETA2) * grad * grad
                tensor -= lr_t * m / (np.sqrt(v) + ADAM_EPS)
        history.train_mse.append(epoch_loss / n_train)
        if n_val:
            with np.errstate(over="ignore", invalid="ignore"):
                residual = forward_batch(weights, val_x) - val_t
                history.validation_mse.append(float(np.mean(residual * residual)))
    return weights, history
