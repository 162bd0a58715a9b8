"""
BEGAN Model Package

Conditional BEGAN with an auto-encoding discriminator.
"""

from .began_model import (BeganModel, BeganState, BeganStepResult, BeganTrainConfig, began_diagnostics,
                          began_reconstruction_graph, began_reconstruction_loss, began_step, update_beta)

__all__ = [
    'BeganModel', 'BeganState', 'BeganStepResult', 'BeganTrainConfig', 'began_diagnostics',
    'began_reconstruction_graph', 'began_reconstruction_loss', 'began_step', 'update_beta',
]
