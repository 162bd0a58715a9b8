"""
Generative Models Package

Each model type has its own subdirectory:
- gan/    minimax GAN, unconditional or measurement-conditional
- began/  conditional BEGAN with an auto-encoding discriminator
- pinv/   pseudo-inverse network fitted against a frozen generator

Usage:
    from backend.models.gan import GanModel
    from backend.models.began import BeganModel
"""

from .base.base_model import BaseGenerativeModel
from .base.base_solver import BaseSolver
from .base.base_parameters import BaseParameters
from .base.base_results import BaseResults

__all__ = [
    'BaseGenerativeModel',
    'BaseSolver',
    'BaseParameters',
    'BaseResults'
]
