"""
Abstract Base Solver Class

This module defines the interface that all reconstruction solvers implement.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np


class BaseSolver(ABC):
    """
    Abstract base class for reconstruction solvers.

    A solver instance is bound to read-only networks and a measurement
    operator; solve() may be called for any number of measurement vectors.
    """

    solver_name = 'unknown'

    def __init__(self, solver_config: Optional[Any] = None):
        """
        Initialize the solver.

        Args:
            solver_config: SolverConfig (or compatible object) with the iteration settings
        """
        self.solver_config = solver_config

    @abstractmethod
    def solve(self, y: np.ndarray, x_true: Optional[np.ndarray] = None, rng: Any = None) -> Any:
        """
        Reconstruct a signal from its measurement.

        Args:
            y: Measurement vector (m,)
            x_true: Ground truth used only for the per-iteration MSE column
            rng: Random stream for latent initialisation

        Returns:
            SolverTrace
        """
        pass

    @abstractmethod
    def validate_input(self, y: np.ndarray) -> Dict[str, Any]:
        """
        Validate a measurement vector.

        Returns:
            {'valid': bool, 'errors': List[str], 'warnings': List[str]}
        """
        pass
