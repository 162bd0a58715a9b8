"""
Helpers shared by the training loops.
"""

import math
from typing import Callable, List, Optional, Tuple, TypeVar

import numpy as np

from ...errors import ArgumentError, EvaluationError, TrainingDivergenceError
from ...neural import autodiff as ad
from ...neural.rng import RngState, sample_gaussian
from ...sensing.noise import NoiseSpec, draw_noise, measure

# Added inside log() of sigmoid outputs; a saturated unit stays finite.
LOG_EPS = 1e-12

T = TypeVar("T")


def sample_latent(rng: RngState, count: int, latent_dim: int) -> np.ndarray:
    """z ~ N(0, I_k), one row per sample."""
    return sample_gaussian(rng, (count, latent_dim))


def condition_batch(x: np.ndarray, A, noise_spec: Optional[NoiseSpec], rng: RngState,
                    conditional: bool) -> Optional[np.ndarray]:
    """Measurements y = A x + eta for a row batch, or None for unconditional training."""
    if not conditional:
        return None
    if A is None:
        raise ArgumentError("Conditional training needs a measurement operator")
    spec = noise_spec or NoiseSpec()
    return measure(A, x, draw_noise(spec, A, x, rng))


def safe_log(x: ad.Var) -> ad.Var:
    return ad.log(ad.add(x, LOG_EPS))


def safe_log1m(x: ad.Var) -> ad.Var:
    """log(1 - x + eps)."""
    return ad.log(ad.add(ad.sub(1.0, x), LOG_EPS))


def guarded(compute: Callable[[], T], epoch: int, batch: int, loss_trace: List[float]) -> T:
    """Run a loss evaluation, reporting evaluation failures as divergence."""
    try:
        return compute()
    except (EvaluationError, FloatingPointError) as e:
        raise TrainingDivergenceError(f"Loss evaluation failed: {e}", epoch, batch, loss_trace) from e


def check_finite(losses: Tuple[float, ...], epoch: int, batch: int, loss_trace: List[float]) -> None:
    for value in losses:
        if not math.isfinite(value):
            raise TrainingDivergenceError(f"Non-finite training loss {value}", epoch, batch, loss_trace)
