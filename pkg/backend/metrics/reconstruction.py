"""
Reconstruction error measures over row batches (one image per row).
"""

import math
from typing import Tuple

import numpy as np

from ..errors import ArgumentError
from ..sensing.operator import apply_operator


def _rows(a: np.ndarray, b: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ArgumentError(f"{what}: shapes {a.shape} and {b.shape} differ")
    if a.shape[0] == 0:
        raise ArgumentError(f"{what}: empty batch")
    return a, b


def mse(x: np.ndarray, x_star: np.ndarray) -> float:
    """(1/C) sum_i ||x_i - x*_i||^2, per image rather than per pixel."""
    x, x_star = _rows(x, x_star, "mse")
    d = x - x_star
    return float(np.mean(np.sum(d * d, axis=1)))


def mse_per_pixel(x: np.ndarray, x_star: np.ndarray) -> float:
    x, x_star = _rows(x, x_star, "mse_per_pixel")
    return mse(x, x_star) / x.shape[1]


def residual_error(A, x: np.ndarray, y: np.ndarray) -> float:
    """(1/C) sum_i ||A x_i - y_i||^2."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise ArgumentError("residual_error: empty batch")
    ax, y = _rows(apply_operator(A, x), y, "residual_error")
    r = ax - y
    return float(np.mean(np.sum(r * r, axis=1)))


def snr_db(A, x: np.ndarray, eta: np.ndarray) -> float:
    """
    10 log10(||A x||^2 / ||eta||^2); +inf when eta is zero.

    Batches are measured over all rows together.
    """
    signal = apply_operator(A, x)
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != signal.shape:
        raise ArgumentError(f"Noise shape {eta.shape} does not match measurement shape {signal.shape}")
    noise_power = float(np.sum(eta * eta))
    if noise_power == 0.0:
        return math.inf
    signal_power = float(np.sum(signal * signal))
    if signal_power == 0.0:
        return -math.inf
    return 10.0 * math.log10(signal_power / noise_power)
