"""
Reconstruction solvers: PGD with inner latent projection and NPGD with a
learned projector.
"""

from .batch_runner import mean_wall_ms_per_image, reconstruct_batch
from .npgd_solver import NpgdSolver, learned_projection, npgd_reconstruct
from .pgd_solver import (PgdSolver, SolverConfig, SolverTrace, gradient_step, inner_descent, measurement_loss,
                         pgd_reconstruct, project_inner)

__all__ = [
    'mean_wall_ms_per_image', 'reconstruct_batch',
    'NpgdSolver', 'learned_projection', 'npgd_reconstruct',
    'PgdSolver', 'SolverConfig', 'SolverTrace', 'gradient_step', 'inner_descent', 'measurement_loss',
    'pgd_reconstruct', 'project_inner',
]
