"""
Pseudo-Inverse Model Package
"""

from .pinv_model import (PinvModel, PinvTrainConfig, pinv_from_discriminator, pinv_loss, pinv_loss_graph,
                         train_pinv)

__all__ = [
    'PinvModel', 'PinvTrainConfig', 'pinv_from_discriminator', 'pinv_loss', 'pinv_loss_graph', 'train_pinv',
]
