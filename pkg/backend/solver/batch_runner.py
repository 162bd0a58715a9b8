"""
Batch reconstruction.

Every image gets its own solve over the shared, read-only networks and
operator. Image i uses the stream RngState(seed).child(i), so results do not
depend on the number of workers.
"""

from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed

from ..errors import ArgumentError
from ..logging_utils import get_logger
from ..models.base.base_solver import BaseSolver
from ..neural.rng import RngState
from .pgd_solver import SolverTrace

logger = get_logger(__name__)


def _solve_one(solver: BaseSolver, y: np.ndarray, x_true: Optional[np.ndarray], seed: int, index: int,
               keep_iterates: bool) -> SolverTrace:
    return solver.solve(y, x_true, RngState(seed).child(index), keep_iterates=keep_iterates)


def reconstruct_batch(solver: BaseSolver, Y: np.ndarray, X_true: Optional[np.ndarray] = None, seed: int = 0,
                      jobs: int = 1, keep_iterates: bool = False) -> List[SolverTrace]:
    """
    Solve each row of Y.

    Args:
        solver: PgdSolver or NpgdSolver
        Y: Measurements, one per row (C x m)
        X_true: Ground truth rows (C x n) for the MSE trace column
        seed: Master seed of the per-image streams
        jobs: joblib worker count (1 runs in-process)
        keep_iterates: Keep every iterate on the traces

    Returns:
        One SolverTrace per row, in input order
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X_true is not None:
        X_true = np.atleast_2d(np.asarray(X_true, dtype=np.float64))
        if X_true.shape[0] != Y.shape[0]:
            raise ArgumentError(f"{Y.shape[0]} measurements but {X_true.shape[0]} ground-truth images")
    if jobs == 0:
        raise ArgumentError("jobs must be non-zero")

    logger.info(f"Reconstructing {Y.shape[0]} images with {solver.solver_name} ({jobs} job(s))")
    return Parallel(n_jobs=jobs)(
        delayed(_solve_one)(solver, Y[i], None if X_true is None else X_true[i], seed, i, keep_iterates)
        for i in range(Y.shape[0])
    )


def mean_wall_ms_per_image(traces: List[SolverTrace]) -> float:
    if not traces:
        raise ArgumentError("No traces")
    return float(np.mean([t.total_wall_ms for t in traces]))
