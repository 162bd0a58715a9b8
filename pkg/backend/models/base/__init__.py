"""
Base Classes for Generative Models

Abstract base classes shared by the trainable models and the reconstruction solvers.
"""

from .base_model import BaseGenerativeModel
from .base_solver import BaseSolver
from .base_parameters import BaseParameters
from .base_results import BaseResults

__all__ = [
    'BaseGenerativeModel',
    'BaseSolver',
    'BaseParameters',
    'BaseResults'
]
