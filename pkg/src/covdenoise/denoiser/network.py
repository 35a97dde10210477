"""Residual convolutional denoiser: configuration, weights, forward pass and
exact backpropagation.

Topology: a stem convolution with ReLU lifts the single input channel to
``num_filters`` feature maps; each residual block applies conv+ReLU then a
linear conv, adds the block input, and applies a final ReLU; a linear head
convolution returns to one channel.  In covariance mode the head output is
symmetrized and eigenvalue-clamped so the result is a usable covariance
matrix; in eigenvector mode it is returned raw.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..covariance import symmetrize
from ..errors import NumericError, ParameterError
from ..randomness import STREAM_INIT, generator
from ..spectral import psd_project
from .ops import conv2d_backward, conv2d_same, relu

MODES = ("covariance", "eigenvectors")


@dataclass(frozen=True)
class DenoiserConfig:
    input_size: int
    num_blocks: int = 10
    num_filters: int = 64
    kernel: int = 3
    learning_rate: float = 1e-3
    batch_size: int = 16
    epochs: int = 10
    validation_fraction: float = 0.2
    seed: int = 0
    mode: str = "covariance"

    def __post_init__(self) -> None:
        if self.input_size < 1:
            raise ParameterError("input_size must be positive")
        if self.num_blocks < 1 or self.num_filters < 1:
            raise ParameterError("num_blocks and num_filters must be positive")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ParameterError(f"kernel size must be odd, got {self.kernel}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ParameterError("validation_fraction must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ParameterError("batch_size must be >= 1 and epochs >= 0")
        if self.learning_rate < 0.0:
            raise ParameterError("learning_rate must be nonnegative")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")

    def with_mode(self, mode: str) -> "DenoiserConfig":
        return replace(self, mode=mode)


@dataclass
class ResidualBlockWeights:
    conv1_kernel: np.ndarray
    conv1_bias: np.ndarray
    conv2_kernel: np.ndarray
    conv2_bias: np.ndarray


@dataclass
class DenoiserWeights:
    config: DenoiserConfig
    stem_kernel: np.ndarray
    stem_bias: np.ndarray
    blocks: list[ResidualBlockWeights]
    head_kernel: np.ndarray
    head_bias: np.ndarray
    normalizer: float = 1.0

    def tensors(self) -> list[np.ndarray]:
        """All parameter tensors in declaration order (also the file order)."""
        out = [self.stem_kernel, self.stem_bias]
        for block in self.blocks:
            out += [block.conv1_kernel, block.conv1_bias, block.conv2_kernel, block.conv2_bias]
        out += [self.head_kernel, self.head_bias]
        return out

    def set_tensors(self, tensors: list[np.ndarray]) -> None:
        expected = len(self.tensors())
        if len(tensors) != expected:
            raise ParameterError(f"expected {expected} tensors, got {len(tensors)}")
        it = iter(tensors)
        self.stem_kernel, self.stem_bias = next(it), next(it)
        for block in self.blocks:
            block.conv1_kernel, block.conv1_bias = next(it), next(it)
            block.conv2_kernel, block.conv2_bias = next(it), next(it)
        self.head_kernel, self.head_bias = next(it), next(it)


def tensor_shapes(config: DenoiserConfig) -> list[tuple[int, ...]]:
    """Parameter shapes in declaration order, derived from the configuration."""
    f, k = config.num_filters, config.kernel
    shapes: list[tuple[int, ...]] = [(f, 1, k, k), (f,)]
    for _ in range(config.num_blocks):
        shapes += [(f, f, k, k), (f,), (f, f, k, k), (f,)]
    shapes += [(1, f, k, k), (1,)]
    return shapes


def init_weights(config: DenoiserConfig) -> DenoiserWeights:
    """He-style Gaussian kernels (std sqrt(2/fan_in)), zero biases, seeded."""
    rng = generator(config.seed, STREAM_INIT)
    k = config.kernel

    def draw(shape: tuple[int, ...]) -> np.ndarray:
        fan_in = shape[1] * k * k
        return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)

    blocks = []
    stem_kernel = draw((config.num_filters, 1, k, k))
    stem_bias = np.zeros(config.num_filters)
    for _ in range(config.num_blocks):
        blocks.append(
            ResidualBlockWeights(
                conv1_kernel=draw((config.num_filters, config.num_filters, k, k)),
                conv1_bias=np.zeros(config.num_filters),
                conv2_kernel=draw((config.num_filters, config.num_filters, k, k)),
                conv2_bias=np.zeros(config.num_filters),
            )
        )
    head_kernel = draw((1, config.num_filters, k, k))
    head_bias = np.zeros(1)
    return DenoiserWeights(
        config=config,
        stem_kernel=stem_kernel,
        stem_bias=stem_bias,
        blocks=blocks,
        head_kernel=head_kernel,
        head_bias=head_bias,
    )


def forward_batch(weights: DenoiserWeights, x: np.ndarray, keep_cache: bool = False):
    """Raw network output for a (batch, 1, p, p) input in normalized units.

    With ``keep_cache`` the per-layer inputs needed by :func:`backward_batch`
    are returned alongside the output.
    """
    stem_out = relu(conv2d_same(x, weights.stem_kernel, weights.stem_bias))
    activations = [stem_out]
    hidden: list[np.ndarray] = []
    current = stem_out
    for block in weights.blocks:
        h1 = relu(conv2d_same(current, block.conv1_kernel, block.conv1_bias))
        z2 = conv2d_same(h1, block.conv2_kernel, block.conv2_bias)
        current = relu(z2 + current)
        if keep_cache:
            hidden.append(h1)
            activations.append(current)
    out = conv2d_same(current, weights.head_kernel, weights.head_bias)
    if keep_cache:
        return out, (x, activations, hidden)
    return out


def backward_batch(
    weights: DenoiserWeights, grad_out: np.ndarray, cache
) -> list[np.ndarray]:
    """Parameter gradients in declaration order for a cached forward pass."""
    x, activations, hidden = cache
    grads: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    grad, gk_head, gb_head = conv2d_backward(grad_out, activations[-1], weights.head_kernel)
    for index in range(len(weights.blocks) - 1, -1, -1):
        block = weights.blocks[index]
        block_in = activations[index]
        block_out = activations[index + 1]
        grad = grad * (block_out > 0.0)
        grad_h1, gk2, gb2 = conv2d_backward(grad, hidden[index], block.conv2_kernel)
        grad_h1 = grad_h1 * (hidden[index] > 0.0)
        grad_in, gk1, gb1 = conv2d_backward(grad_h1, block_in, block.conv1_kernel)
        grads[index] = (gk1, gb1, gk2, gb2)
        grad = grad_in + grad  # skip connection
    grad = grad * (activations[0] > 0.0)
    _, gk_stem, gb_stem = conv2d_backward(grad, x, weights.stem_kernel)
    flat: list[np.ndarray] = [gk_stem, gb_stem]
    for index in range(len(weights.blocks)):
        flat.extend(grads[index])
    flat += [gk_head, gb_head]
    return flat


def loss_and_gradients(
    weights: DenoiserWeights, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Mean-squared error over a batch plus its parameter gradients."""
    out, cache = forward_batch(weights, inputs, keep_cache=True)
    diff = out - targets
    loss = float(np.mean(diff * diff))
    grad_out = 2.0 * diff / diff.size
    return loss, backward_batch(weights, grad_out, cache)


def forward(weights: DenoiserWeights, matrix: np.ndarray) -> np.ndarray:
    """Denoise one p x p matrix (input units; normalization handled here)."""
    matrix = np.asarray(matrix, dtype=float)
    p = weights.config.input_size
    if matrix.shape != (p, p):
        raise ParameterError(f"expected a {p}x{p} input, got {matrix.shape}")
    scale = weights.normalizer
    out = forward_batch(weights, matrix[None, None, :, :] / scale)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite activation in the network head output")
    result = out[0, 0] * scale
    if weights.config.mode == "covariance":
        return psd_project(symmetrize(result), 0.0)
    return result
