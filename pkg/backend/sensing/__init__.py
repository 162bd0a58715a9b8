"""
Linear forward model y = A x + eta.
"""

from .noise import NoiseSpec, draw_noise, measure, noise_for_snr
from .operator import MeasurementOperator, adjoint, apply_operator, make_measurement_operator

__all__ = [
    'NoiseSpec', 'draw_noise', 'measure', 'noise_for_snr',
    'MeasurementOperator', 'adjoint', 'apply_operator', 'make_measurement_operator',
]
