"""
Network-based Projected Gradient Descent.

Same outer loop as PGD, with the inner latent optimisation replaced by one
evaluation of the learned projector: x_{n+1} = G(G+(w_n)|y).
"""

from typing import Any, Dict, Optional

import numpy as np

from ..errors import ArgumentError
from ..models.base.base_solver import BaseSolver
from ..neural.mlp import MlpNetwork, mlp_forward
from ..neural.rng import RngState
from .pgd_solver import SolverConfig, SolverTrace, run_projected_descent


def learned_projection(G: MlpNetwork, pinv: MlpNetwork, w: np.ndarray, y: Optional[np.ndarray] = None):
    """(G(G+(w)|y), G+(w)); G+ receives y only when it is conditional."""
    if pinv.input_dim != G.output_dim or pinv.output_dim != G.input_dim:
        raise ArgumentError(f"G+ ({pinv.input_dim} -> {pinv.output_dim}) does not invert G "
                            f"({G.input_dim} -> {G.output_dim})")
    g_cond = y if G.condition_dim else None
    p_cond = y if pinv.condition_dim else None
    if (g_cond is None and G.condition_dim) or (p_cond is None and pinv.condition_dim):
        raise ArgumentError("Conditional networks need the measurement y")
    z = mlp_forward(pinv, w, p_cond)
    return mlp_forward(G, z, g_cond), z


def npgd_reconstruct(G: MlpNetwork, pinv: MlpNetwork, A, y: np.ndarray, cfg: Optional[SolverConfig] = None,
                     x_true: Optional[np.ndarray] = None, keep_iterates: bool = False) -> SolverTrace:
    """
    NPGD; deterministic given its inputs (no random draws are made).

    Returns:
        SolverTrace, wall time per outer iteration included
    """
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=np.float64)
    return run_projected_descent(A, y, cfg, lambda w: learned_projection(G, pinv, w, y),
                                 x_true, keep_iterates, "npgd")


class NpgdSolver(BaseSolver):
    """NPGD bound to a generator, its pseudo-inverse and a measurement operator."""

    solver_name = 'npgd'

    def __init__(self, G: MlpNetwork, pinv: MlpNetwork, A, solver_config: Optional[SolverConfig] = None):
        super().__init__(solver_config or SolverConfig())
        self.G = G
        self.pinv = pinv
        self.A = A

    def validate_input(self, y: np.ndarray) -> Dict[str, Any]:
        errors = []
        y = np.asarray(y)
        matrix = self.A.matrix if hasattr(self.A, 'matrix') else np.asarray(self.A)
        if y.shape != (matrix.shape[0],):
            errors.append(f"Measurement shape {y.shape} does not match ({matrix.shape[0]},)")
        elif not np.all(np.isfinite(y)):
            errors.append("Measurement contains non-finite values")
        if self.G.output_dim != matrix.shape[1]:
            errors.append(f"Generator output width {self.G.output_dim} != operator width {matrix.shape[1]}")
        if self.pinv.output_dim != self.G.input_dim:
            errors.append(f"G+ output width {self.pinv.output_dim} != latent width {self.G.input_dim}")
        return {'valid': not errors, 'errors': errors, 'warnings': []}

    def solve(self, y: np.ndarray, x_true: Optional[np.ndarray] = None, rng: Optional[RngState] = None,
              keep_iterates: bool = False) -> SolverTrace:
        validation = self.validate_input(y)
        if not validation['valid']:
            raise ArgumentError('; '.join(validation['errors']))
        return npgd_reconstruct(self.G, self.pinv, self.A, y, self.solver_config, x_true, keep_iterates)
