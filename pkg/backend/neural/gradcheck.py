"""
Finite-difference gradient oracle.
"""

from typing import Callable, List, Optional

import numpy as np

from . import autodiff as ad
from .rng import RngState


def _checked_entries(size: int, max_entries: Optional[int], rng: Optional[RngState]) -> np.ndarray:
    if max_entries is None or size <= max_entries:
        return np.arange(size)
    return np.sort((rng or RngState(0)).permutation(size)[:max_entries])


def numerical_grad(f: Callable[..., ad.Var], *at, h: float = 1e-5, max_entries: Optional[int] = None,
                   rng: Optional[RngState] = None) -> List[np.ndarray]:
    """
    Central differences of scalar f with respect to every input element.

    With max_entries only that many randomly chosen elements per input are
    differenced; the others are left NaN.
    """
    points = [np.array(a, dtype=np.float64) for a in at]

    def evaluate():
        out = f(*[ad.constant(p.copy()) for p in points])
        return float(np.asarray(out.value if isinstance(out, ad.Var) else out).reshape(-1)[0])

    grads = []
    for p in points:
        g = np.full_like(p, np.nan) if max_entries is not None else np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in _checked_entries(flat.size, max_entries, rng):
            original = flat[i]
            flat[i] = original + h
            plus = evaluate()
            flat[i] = original - h
            minus = evaluate()
            flat[i] = original
            gflat[i] = (plus - minus) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_error(f: Callable[..., ad.Var], *at, h: float = 1e-5, max_entries: Optional[int] = None,
                       rng: Optional[RngState] = None) -> float:
    """
    Largest element-wise |analytic - numeric| / max(1, |analytic|, |numeric|)
    over all checked input elements.
    """
    analytic = ad.grad(f, *at)
    numeric = numerical_grad(f, *at, h=h, max_entries=max_entries, rng=rng)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        checked = ~np.isnan(n)
        if not checked.any():
            continue
        a, n = a[checked], n[checked]
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float(np.max(np.abs(a - n) / scale)))
    return worst


def check_gradients(f: Callable[..., ad.Var], *at, h: float = 1e-5, tolerance: float = 1e-5) -> bool:
    return max_relative_error(f, *at, h=h) < tolerance
