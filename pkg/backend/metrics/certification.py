"""
Empirical certification of the recovery conditions.

Restricted eigenvalue bounds are sample minima/maxima of
||A(x1 - x2)||^2 / ||x1 - x2||^2 over pairs, so they are optimistic and are
always reported with the number of pairs used.
"""

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ArgumentError, EstimationError
from ..logging_utils import get_logger
from ..neural.mlp import MlpNetwork, mlp_forward
from ..neural.rng import RngState, sample_gaussian
from ..sensing.operator import apply_operator
from ..solver.pgd_solver import SolverConfig, SolverTrace, inner_descent

logger = get_logger(__name__)

MIN_PAIR_DISTANCE = 1e-9

Pair = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class RecEstimate:
    alpha: float
    beta: float
    pairs: int
    skipped: int = 0
    seed: Optional[int] = None

    @property
    def rho(self) -> float:
        """Operator-bound witness sqrt(beta)."""
        return math.sqrt(self.beta)

    @property
    def ratio(self) -> float:
        return self.beta / self.alpha if self.alpha > 0 else math.inf

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), 'rho': self.rho, 'ratio': self.ratio}


@dataclass(frozen=True)
class SRecEstimate:
    gamma: float
    pairs: int
    skipped: int = 0
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ProjectorEstimate:
    delta: float
    samples: int
    excluded: int
    inner_iters: int
    inner_lr: float
    tolerance: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# ========================================
# PAIR SOURCES
# ========================================

def range_pairs(G: MlpNetwork, count: int, rng: RngState, condition: Optional[np.ndarray] = None) -> Iterator[Pair]:
    """`count` pairs (G(z1|y), G(z2|y)) with independent latent draws."""
    for _ in range(count):
        z = sample_gaussian(rng, (2, G.input_dim))
        y = None if condition is None else np.repeat(np.atleast_2d(condition), 2, axis=0)
        x = mlp_forward(G, z, y)
        yield x[0], x[1]


def dataset_pairs(images: np.ndarray, count: int, rng: RngState) -> Iterator[Pair]:
    """`count` pairs of distinct, uniformly chosen rows."""
    images = np.asarray(images, dtype=np.float64)
    if images.shape[0] < 2:
        raise ArgumentError("Need at least two images to form pairs")
    for _ in range(count):
        first, second = rng.permutation(images.shape[0])[:2]
        yield images[first], images[second]


def all_pairs(points: Sequence[np.ndarray]) -> Iterator[Pair]:
    """Every unordered pair of the given points (e.g. the iterates of a solver run)."""
    return itertools.combinations(points, 2)


def _ratios(A, pairs: Iterable[Pair], count: Optional[int]) -> Tuple[np.ndarray, int]:
    if count is not None:
        if count < 2:
            raise ArgumentError("count must be >= 2")
        pairs = itertools.islice(pairs, count)
    ratios, skipped = [], 0
    for x1, x2 in pairs:
        d = np.asarray(x1, dtype=np.float64) - np.asarray(x2, dtype=np.float64)
        norm2 = float(d @ d)
        if math.sqrt(norm2) < MIN_PAIR_DISTANCE:
            skipped += 1
            continue
        ad_ = apply_operator(A, d)
        ratios.append(float(ad_ @ ad_) / norm2)
    if not ratios:
        raise EstimationError(f"All {skipped} pairs were degenerate (||x1 - x2|| < {MIN_PAIR_DISTANCE})")
    return np.asarray(ratios), skipped


# ========================================
# ESTIMATORS
# ========================================

def estimate_rec(A, pairs: Iterable[Pair], count: Optional[int] = None, seed: Optional[int] = None) -> RecEstimate:
    """alpha = min and beta = max of ||A d||^2 / ||d||^2 over the pairs."""
    ratios, skipped = _ratios(A, pairs, count)
    estimate = RecEstimate(float(ratios.min()), float(ratios.max()), len(ratios), skipped, seed)
    logger.info(f"REC estimate over {estimate.pairs} pairs: alpha={estimate.alpha:.6g} beta={estimate.beta:.6g}")
    return estimate


def estimate_s_rec(A, pairs: Iterable[Pair], count: Optional[int] = None,
                   seed: Optional[int] = None) -> SRecEstimate:
    """gamma = min ratio, i.e. S-REC(S, gamma, 0) holds on the sample."""
    ratios, skipped = _ratios(A, pairs, count)
    return SRecEstimate(float(ratios.min()), len(ratios), skipped, seed)


def estimate_projector_delta(G: MlpNetwork, pinv: MlpNetwork, samples: Iterable[np.ndarray],
                             cfg: Optional[SolverConfig] = None, count: Optional[int] = None,
                             condition: Optional[np.ndarray] = None, tolerance: float = 1e-6,
                             exact_projector: Optional[Callable[[np.ndarray], np.ndarray]] = None
                             ) -> ProjectorEstimate:
    """
    delta = max over samples of ||x - G(G+(x))||^2 - min_z ||x - G(z)||^2.

    The minimum comes from `exact_projector` when given, otherwise from a
    high-budget inner descent started at G+(x). Samples whose inner loss has
    not stabilised (last change above tolerance * max(1, loss)) are excluded
    and counted.
    """
    cfg = cfg or SolverConfig(inner_iters=1000, inner_lr=0.01)
    if count is not None:
        samples = itertools.islice(samples, count)
    g_cond = None if G.condition_dim == 0 else np.atleast_2d(condition)
    p_cond = None if pinv.condition_dim == 0 else np.atleast_2d(condition)

    deltas, excluded = [], 0
    for x in samples:
        x = np.asarray(x, dtype=np.float64)
        z_learned = mlp_forward(pinv, x[None, :], p_cond)
        r = x - mlp_forward(G, z_learned, g_cond)[0]
        learned = float(r @ r)
        if exact_projector is not None:
            e = x - exact_projector(x)
            best = float(e @ e)
        else:
            _, losses = inner_descent(G, x, condition, z_learned[0], cfg)
            if abs(losses[-1] - losses[-2]) > tolerance * max(1.0, losses[-1]):
                excluded += 1
                continue
            best = losses[-1]
        deltas.append(learned - best)

    if not deltas:
        raise EstimationError(f"No usable samples for the projector estimate ({excluded} excluded)")
    estimate = ProjectorEstimate(float(max(deltas)), len(deltas), excluded, cfg.inner_iters, cfg.inner_lr, tolerance)
    logger.info(f"Projector delta over {estimate.samples} samples: {estimate.delta:.6g} "
                f"({estimate.excluded} excluded)")
    return estimate


# ========================================
# CONVERGENCE BOUND
# ========================================

def npgd_error_bound(f0: float, alpha: float, beta: float, delta: float, n: int) -> float:
    """(beta/alpha - 1)^n f0 + beta delta / (2 - beta/alpha); requires beta/alpha < 2."""
    if alpha <= 0:
        raise ArgumentError("alpha must be > 0")
    ratio = beta / alpha
    if ratio >= 2:
        raise ArgumentError(f"Bound needs beta/alpha < 2, got {ratio:.6g}")
    return (ratio - 1.0) ** n * f0 + beta * delta / (2.0 - ratio)


def check_npgd_bound(trace: SolverTrace, rec: RecEstimate, delta: float, atol: float = 1e-12) -> Dict[str, Any]:
    """
    Compare f(x_n) of a trace with the bound at every n.

    Returns:
        {'holds': bool, 'bounds': [...], 'violations': [n, ...]}
    """
    f0 = trace.f_xn[0]
    bounds = [npgd_error_bound(f0, rec.alpha, rec.beta, delta, n) for n in range(len(trace.f_xn))]
    violations = [n for n, (f, b) in enumerate(zip(trace.f_xn, bounds)) if f > b + atol]
    return {'holds': not violations, 'bounds': bounds, 'violations': violations}


def speedup_ratio(pgd_ms: Union[float, Sequence[float]], npgd_ms: Union[float, Sequence[float]]) -> float:
    """Mean PGD wall-ms per image divided by mean NPGD wall-ms per image."""
    pgd = float(np.mean(pgd_ms))
    npgd = float(np.mean(npgd_ms))
    if pgd < 0 or npgd < 0:
        raise ArgumentError("Wall times must be >= 0")
    if npgd == 0:
        return math.inf
    return pgd / npgd
