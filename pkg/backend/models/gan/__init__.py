"""
GAN Model Package

Minimax GAN and measurement-conditional GAN.
"""

from .gan_model import (GanModel, GanTrainConfig, discriminator_loss, discriminator_loss_graph,
                        discriminator_step, generator_loss_graph, generator_step)

__all__ = [
    'GanModel', 'GanTrainConfig', 'discriminator_loss', 'discriminator_loss_graph',
    'discriminator_step', 'generator_loss_graph', 'generator_step',
]
