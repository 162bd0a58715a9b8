"""
Structural similarity.

Pixels in [-1, 1] are shifted to [0, L] before evaluation. Window statistics
use population (1/M^2) means, variances and covariance.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ArgumentError


@dataclass(frozen=True)
class SsimConfig:
    window: int = 7
    stride: int = 1
    dynamic_range: float = 2.0
    k1: float = 0.01
    k2: float = 0.03
    # Denominator (mu_x + mu_y + C1)(sigma_x + sigma_y + C2) with standard deviations;
    # not 1 at identical images.
    unsquared_means: bool = False

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ArgumentError("window and stride must be >= 1")
        if self.dynamic_range <= 0 or self.k1 <= 0 or self.k2 <= 0:
            raise ArgumentError("dynamic_range, k1 and k2 must be > 0")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


def _as_image(x: np.ndarray, shape: Optional[Tuple[int, int]]) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x
    if x.ndim != 1:
        raise ArgumentError(f"Expected an image or a flat image, got shape {x.shape}")
    if shape is None:
        side = math.isqrt(x.size)
        if side * side != x.size:
            raise ArgumentError(f"Cannot infer a square shape for {x.size} pixels; pass shape")
        shape = (side, side)
    return x.reshape(shape)


def to_unit_range(image: np.ndarray, cfg: SsimConfig) -> np.ndarray:
    """[-1, 1] -> [0, L]."""
    return (np.asarray(image, dtype=np.float64) + 1.0) * (cfg.dynamic_range / 2.0)


def _window_ratio(mu_a, mu_b, var_a, var_b, cov, cfg: SsimConfig):
    numerator = (2.0 * mu_a * mu_b + cfg.c1) * (2.0 * cov + cfg.c2)
    if cfg.unsquared_means:
        denominator = (mu_a + mu_b + cfg.c1) * (np.sqrt(var_a) + np.sqrt(var_b) + cfg.c2)
    else:
        denominator = (mu_a * mu_a + mu_b * mu_b + cfg.c1) * (var_a + var_b + cfg.c2)
    return numerator / denominator


def ssim_map(x: np.ndarray, x_star: np.ndarray, cfg: Optional[SsimConfig] = None,
             shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """SSIM of every M x M window (row-major window grid)."""
    cfg = cfg or SsimConfig()
    a = to_unit_range(_as_image(x, shape), cfg)
    b = to_unit_range(_as_image(x_star, shape), cfg)
    if a.shape != b.shape:
        raise ArgumentError(f"Image shapes {a.shape} and {b.shape} differ")
    if cfg.window > min(a.shape):
        raise ArgumentError(f"Window {cfg.window} larger than image {a.shape}")

    wa = sliding_window_view(a, (cfg.window, cfg.window))[::cfg.stride, ::cfg.stride]
    wb = sliding_window_view(b, (cfg.window, cfg.window))[::cfg.stride, ::cfg.stride]
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).mean(axis=(-2, -1))
    var_b = (db * db).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    return _window_ratio(mu_a, mu_b, var_a, var_b, cov, cfg)


def mssim(x: np.ndarray, x_star: np.ndarray, cfg: Optional[SsimConfig] = None,
          shape: Optional[Tuple[int, int]] = None) -> float:
    """Mean SSIM over all windows."""
    return float(np.mean(ssim_map(x, x_star, cfg, shape)))


def ssim(x: np.ndarray, x_star: np.ndarray, cfg: Optional[SsimConfig] = None,
         shape: Optional[Tuple[int, int]] = None) -> float:
    """SSIM with the whole image as a single window."""
    cfg = cfg or SsimConfig()
    a = to_unit_range(_as_image(x, shape), cfg)
    b = to_unit_range(_as_image(x_star, shape), cfg)
    if a.shape != b.shape:
        raise ArgumentError(f"Image shapes {a.shape} and {b.shape} differ")
    da, db = a - a.mean(), b - b.mean()
    return float(_window_ratio(a.mean(), b.mean(), (da * da).mean(), (db * db).mean(), (da * db).mean(), cfg))


def mssim_batch(x: np.ndarray, x_star: np.ndarray, shape: Tuple[int, int],
                cfg: Optional[SsimConfig] = None) -> float:
    """Mean of mssim over a row batch of flat images."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x_star = np.atleast_2d(np.asarray(x_star, dtype=np.float64))
    if x.shape != x_star.shape or x.shape[0] == 0:
        raise ArgumentError(f"Batches {x.shape} and {x_star.shape} are empty or differ")
    return float(np.mean([mssim(a, b, cfg, shape) for a, b in zip(x, x_star)]))
