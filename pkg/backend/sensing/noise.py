"""
Measurement noise and measurement application.

SNR is enforced per realisation: SNR_dB = 10 log10(||Ax||^2 / ||eta||^2).
"""

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..errors import ArgumentError, DegenerateSignalError
from ..neural.rng import RngState, sample_gaussian
from .operator import apply_operator

NOISELESS = "noiseless"
TARGET_SNR = "target_snr_db"
FIXED_SIGMA = "fixed_sigma"


@dataclass(frozen=True)
class NoiseSpec:
    mode: str = NOISELESS
    snr_db: Optional[float] = None
    sigma: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (NOISELESS, TARGET_SNR, FIXED_SIGMA):
            raise ArgumentError(f"Unknown noise mode '{self.mode}'")
        if self.mode == TARGET_SNR and self.snr_db is None:
            raise ArgumentError("target_snr_db mode needs snr_db")
        if self.mode == FIXED_SIGMA and (self.sigma is None or self.sigma < 0):
            raise ArgumentError("fixed_sigma mode needs sigma >= 0")

    @classmethod
    def parse(cls, value: Union[str, float, int, None], seed: int = 0) -> "NoiseSpec":
        """'noiseless' / None / inf, a dB value, or 'sigma:<std>'."""
        if value is None or (isinstance(value, str) and value.strip().lower() == NOISELESS):
            return cls(NOISELESS, seed=seed)
        if isinstance(value, str) and value.strip().lower().startswith("sigma:"):
            return cls(FIXED_SIGMA, sigma=float(value.split(":", 1)[1]), seed=seed)
        snr = float(value)
        if math.isinf(snr) and snr > 0:
            return cls(NOISELESS, seed=seed)
        return cls(TARGET_SNR, snr_db=snr, seed=seed)

    @property
    def label(self) -> str:
        if self.mode == NOISELESS:
            return NOISELESS
        if self.mode == FIXED_SIGMA:
            return f"sigma:{self.sigma}"
        return f"{self.snr_db:g}"

    @property
    def snr_value(self) -> float:
        """Target SNR in dB; +inf for noiseless."""
        if self.mode == TARGET_SNR:
            return float(self.snr_db)
        return math.inf if self.mode == NOISELESS else math.nan


def noise_for_snr(A, x: np.ndarray, snr_db: float, rng: RngState) -> np.ndarray:
    """
    Noise whose realised SNR equals the target exactly.

    eta = g * ||Ax|| / (10^(snr_db/20) * ||g||) for a standard-normal draw g.
    A row batch (C x n) gets one such draw per row, in row order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return np.stack([noise_for_snr(A, row, snr_db, rng) for row in x])
    if x.ndim != 1:
        raise ArgumentError(f"Expected a signal (n,) or a row batch (C x n), got shape {x.shape}")
    signal = apply_operator(A, x)
    m = signal.shape[-1]
    if math.isinf(snr_db) and snr_db > 0:
        return np.zeros(m)
    signal_norm = float(np.linalg.norm(signal))
    if signal_norm == 0.0:
        raise DegenerateSignalError("Ax = 0: a finite SNR target is undefined")
    g = sample_gaussian(rng, m)
    return g * (signal_norm / (10.0 ** (snr_db / 20.0) * float(np.linalg.norm(g))))


def draw_noise(spec: NoiseSpec, A, x: np.ndarray, rng: RngState) -> np.ndarray:
    """Noise for one signal (m,) or a row batch (C x m), per the NoiseSpec mode."""
    x = np.asarray(x, dtype=np.float64)
    m = apply_operator(A, x[:1] if x.ndim == 2 else x).shape[-1]
    if spec.mode == NOISELESS:
        return np.zeros((x.shape[0], m) if x.ndim == 2 else m)
    if spec.mode == FIXED_SIGMA:
        return sample_gaussian(rng, (x.shape[0], m) if x.ndim == 2 else m, 0.0, spec.sigma)
    return noise_for_snr(A, x, spec.snr_db, rng)


def measure(A, x: np.ndarray, eta: Optional[np.ndarray] = None) -> np.ndarray:
    """y = A x + eta for a signal (n,) or a row batch (C x n)."""
    y = apply_operator(A, x)
    if eta is None:
        return y
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != y.shape:
        raise ArgumentError(f"Noise shape {eta.shape} does not match measurement shape {y.shape}")
    return y + eta
