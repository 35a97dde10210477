"""Dense 2-D convolution with 'same' zero padding, plus its exact backward
pass.  Batches are laid out (batch, channels, height, width); kernels are
(out_channels, in_channels, k, k) with odd k, cross-correlation semantics.

The forward path lowers the padded input to column form once and contracts
with a single matmul; the backward path rebuilds the columns from the stored
layer input, so nothing but activations needs to be cached between passes.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _check_conv_shapes(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> None:
    if x.ndim != 4:
        raise ParameterError(f"input must be 4-d (batch, channels, h, w), got {x.shape}")
    if kernel.ndim != 4:
        raise ParameterError(f"kernel must be 4-d (out, in, k, k), got {kernel.shape}")
    out_ch, in_ch, kh, kw = kernel.shape
    if kh != kw or kh % 2 == 0:
        raise ParameterError(f"kernel must be square with odd size, got {kh}x{kw}")
    if x.shape[1] != in_ch:
        raise ParameterError(
            f"input channels {x.shape[1]} do not match kernel input channels {in_ch}"
        )
    if bias.shape != (out_ch,):
        raise ParameterError(f"bias must have shape ({out_ch},), got {bias.shape}")


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*k*k, H*W) columns of the zero-padded input."""
    batch, channels, height, width = x.shape
    pad = k // 2
    padded = np.zeros((batch, channels, height + 2 * pad, width + 2 * pad))
    padded[:, :, pad:pad + height, pad:pad + width] = x
    cols = np.empty((batch, channels, k * k, height, width))
    for di in range(k):
        for dj in range(k):
            cols[:, :, di * k + dj] = padded[:, :, di:di + height, dj:dj + width]
    return cols.reshape(batch, channels * k * k, height * width)


def _col2im(cols: np.ndarray, shape: tuple, k: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add columns back onto the grid."""
    batch, channels, height, width = shape
    pad = k // 2
    acc = np.zeros((batch, channels, height + 2 * pad, width + 2 * pad))
    cols = cols.reshape(batch, channels, k * k, height, width)
    for di in range(k):
        for dj in range(k):
            acc[:, :, di:di + height, dj:dj + width] += cols[:, :, di * k + dj]
    return acc[:, :, pad:pad + height, pad:pad + width]


def conv2d_same(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Convolve with zero padding (k-1)/2 so spatial size is preserved."""
    x = np.asarray(x, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    bias = np.asarray(bias, dtype=float)
    _check_conv_shapes(x, kernel, bias)
    batch, _, height, width = x.shape
    out_ch = kernel.shape[0]
    k = kernel.shape[2]
    cols = _im2col(x, k)
    flat = kernel.reshape(out_ch, -1)
    out = np.matmul(flat, cols) + bias[:, None]
    return out.reshape(batch, out_ch, height, width)


def conv2d_backward(
    grad_out: np.ndarray, x: np.ndarray, kernel: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (d_input, d_kernel, d_bias) of conv2d_same at (x, kernel)."""
    batch, out_ch, height, width = grad_out.shape
    k = kernel.shape[2]
    cols = _im2col(x, k)
    grad_flat = grad_out.reshape(batch, out_ch, height * width)
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    grad_kernel = np.matmul(grad_flat, cols.transpose(0, 2, 1)).sum(axis=0)
    grad_kernel = grad_kernel.reshape(kernel.shape)
    flat = kernel.reshape(out_ch, -1)
    grad_cols = np.matmul(flat.T, grad_flat)
    grad_x = _col2im(grad_cols, x.shape, k)
    return grad_x, grad_kernel, grad_bias
