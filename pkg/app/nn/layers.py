"""
Forward and backward kernels for the supported layer types.

Every forward returns (output, cache); every backward takes the upstream
gradient and the cache and returns the input gradient plus parameter
gradients where the layer has parameters.
"""

from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x: np.ndarray, size: int, stride: int) -> np.ndarray:
    """View of x (N, C, H, W) as (N, C, Ho, Wo, size, size) windows."""
    return sliding_window_view(x, (size, size), axis=(2, 3))[:, :, ::stride, ::stride]


def _scatter_windows(
    grad_windows: np.ndarray,
    input_shape: Tuple[int, ...],
    size: int,
    stride: int,
) -> np.ndarray:
    """Adjoint of _windows: sum window gradients back onto the input grid."""
    dx = np.zeros(input_shape, dtype=grad_windows.dtype)
    out_h, out_w = grad_windows.shape[2], grad_windows.shape[3]
    for i in range(size):
        for j in range(size):
            dx[:, :, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride] += (
                grad_windows[:, :, :, :, i, j]
            )
    return dx


def conv2d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int = 1):
    kernel = weight.shape[2]
    cols = _windows(x, kernel, stride)
    out = np.einsum("nchwij,ocij->nohw", cols, weight, optimize=True)
    out += bias[None, :, None, None]
    return out, (x.shape, cols, weight, stride)


def conv2d_backward(dout: np.ndarray, cache):
    input_shape, cols, weight, stride = cache
    kernel = weight.shape[2]
    dweight = np.einsum("nohw,nchwij->ocij", dout, cols, optimize=True)
    dbias = dout.sum(axis=(0, 2, 3))
    dcols = np.einsum("nohw,ocij->nchwij", dout, weight, optimize=True)
    dx = _scatter_windows(dcols, input_shape, kernel, stride)
    return dx, dweight, dbias


def maxpool_forward(x: np.ndarray, size: int = 2, stride: int = 2):
    windows = _windows(x, size, stride)
    n, c, out_h, out_w = windows.shape[:4]
    flat = windows.reshape(n, c, out_h, out_w, size * size)
    # argmax picks the first maximum, which fixes the routing of ties
    winner = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, winner[..., None], axis=-1)[..., 0]
    return out, (x.shape, winner, size, stride)


def maxpool_backward(dout: np.ndarray, cache):
    input_shape, winner, size, stride = cache
    grad_windows = np.zeros(dout.shape + (size, size), dtype=dout.dtype)
    for i in range(size):
        for j in range(size):
            grad_windows[..., i, j] = np.where(winner == i * size + j, dout, 0)
    return _scatter_windows(grad_windows, input_shape, size, stride)


def linear_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    return x @ weight + bias, (x, weight)


def linear_backward(dout: np.ndarray, cache):
    x, weight = cache
    return dout @ weight.T, x.T @ dout, dout.sum(axis=0)


def relu_forward(x: np.ndarray):
    mask = x > 0
    return np.where(mask, x, 0).astype(x.dtype, copy=False), mask


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, dout, 0).astype(dout.dtype, copy=False)
