"""
Abstract Base Class for Generative Models

This module defines the interface that all trainable generative models
implement (GAN, conditional GAN, conditional BEGAN, pseudo-inverse network).
Each model is driven by its JSON configuration in backend/config/models/.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import json

import numpy as np

from ...errors import ArgumentError
from ...logging_utils import get_logger
from ...neural.mlp import Activation, MlpNetwork, NetworkKind, init_mlp, mlp_forward
from ...neural.rng import RngState, sample_gaussian
from ...neural.weights_io import save_weights
from .base_parameters import BaseParameters
from .base_results import BaseResults

logger = get_logger(__name__)


class BaseGenerativeModel(ABC):
    """
    Abstract base class for all generative models.

    Subclasses own a set of named networks (for example 'generator' and
    'discriminator'), a training history and the validated parameters.
    """

    history_columns: List[str] = ['epoch', 'wall_ms']

    def __init__(self, model_config: Dict):
        """
        Initialize the model.

        Args:
            model_config: Dictionary containing model configuration from JSON file
        """
        self.model_config = model_config
        self.model_type = model_config['type']
        self.model_name = model_config['name']
        self.model_description = model_config.get('description', '')

        # Model state
        self.parameters: Dict[str, Any] = {}
        self.networks: Dict[str, MlpNetwork] = {}
        self.history = BaseResults(self.history_columns)
        self.kpis: Dict[str, Any] = {}

        self._parameters_validated = False

    def get_parameter_schema(self) -> Dict:
        return self.model_config.get('parameters', {})

    def get_architecture(self) -> Dict:
        return self.model_config.get('architecture', {})

    def validate_parameters(self, params: Dict) -> Dict[str, Any]:
        """
        Validate training parameters against the model's schema.

        Returns:
            {'valid': bool, 'errors': List[str], 'warnings': List[str], 'processed_params': Dict}
        """
        handler = BaseParameters(self.get_parameter_schema())
        handler.set_parameters(params or {})
        return handler.validate_parameters()

    def set_parameters(self, params: Dict) -> bool:
        """
        Set and validate model parameters.

        Raises:
            ArgumentError: listing every validation error
        """
        validation = self.validate_parameters(params)
        for warning in validation['warnings']:
            logger.warning(warning)
        if not validation['valid']:
            self._parameters_validated = False
            raise ArgumentError(f"Invalid {self.model_type} parameters: {'; '.join(validation['errors'])}")
        self.parameters = validation['processed_params']
        self._parameters_validated = True
        return True

    def build_network(self, section: str, input_dim: int, output_dim: int, rng: RngState,
                      condition_dim: int = 0, kind: NetworkKind = NetworkKind.GENERATOR,
                      bottleneck: Optional[int] = None) -> MlpNetwork:
        """
        Initialise a network from an architecture section of the model config.

        A section lists 'hidden' widths, the 'hidden_activation' and the
        'output_activation'. With `bottleneck`, the section describes an
        auto-encoder: 'hidden' widths, the bottleneck, the mirrored widths.
        """
        spec = self.get_architecture().get(section)
        if spec is None:
            raise ArgumentError(f"Model '{self.model_type}' has no '{section}' architecture")
        hidden = [int(h) for h in spec.get('hidden', [])]
        hidden_act = Activation.parse(spec.get('hidden_activation', 'relu'))
        output_act = Activation.parse(spec.get('output_activation', 'identity'))

        if bottleneck is None:
            dims = [input_dim, *hidden, output_dim]
            activations = [hidden_act] * len(hidden) + [output_act]
        else:
            dims = [input_dim, *hidden, bottleneck, *reversed(hidden), output_dim]
            bottleneck_act = Activation.parse(spec.get('bottleneck_activation', 'identity'))
            activations = [hidden_act] * len(hidden) + [bottleneck_act] + [hidden_act] * len(hidden) + [output_act]
        return init_mlp(dims, activations, rng, condition_dim, kind)

    @abstractmethod
    def train(self, *args, **kwargs) -> BaseResults:
        """
        Run the training loop.

        Returns:
            Per-epoch training history
        """
        pass

    def save_checkpoint(self, epoch: int, every: int, checkpoint_dir: Optional[Union[str, Path]]) -> None:
        """Write every network as '<name>_epochNNNN.gpcs' when epoch is a multiple of `every`."""
        if not every or checkpoint_dir is None or epoch % every:
            return
        for name, net in self.networks.items():
            path = save_weights(Path(checkpoint_dir) / f"{name}_epoch{epoch:04d}.gpcs", net)
            logger.debug(f"Checkpoint written: {path}")

    def sample(self, count: int, rng: RngState, condition: Optional[np.ndarray] = None) -> np.ndarray:
        """Generator samples G(z|y) for fresh latent draws."""
        if 'generator' not in self.networks:
            raise ArgumentError("Generator has not been trained")
        generator = self.networks['generator']
        z = sample_gaussian(rng, (count, generator.input_dim))
        return mlp_forward(generator, z, condition)

    def calculate_kpis(self) -> Dict[str, Any]:
        kpis = self.history.calculate_kpis()
        for name, net in self.networks.items():
            kpis[f'{name}_parameters'] = net.parameter_count
            kpis[f'{name}_checksum'] = net.checksum()
        return kpis

    def export_solution(self, output_dir: str, history_name: str = "training_history.csv") -> Dict[str, str]:
        """
        Export networks, history and KPIs.

        Args:
            output_dir: Directory to save files
            history_name: File name of the per-epoch CSV

        Returns:
            Dictionary of exported file paths
        """
        if not self.networks:
            raise ArgumentError("No trained networks to export")

        output = Path(output_dir)
        output.mkdir(parents=True, exist_ok=True)
        exported: Dict[str, str] = {}

        for name, net in self.networks.items():
            exported[name] = str(save_weights(output / f"{name}.gpcs", net))

        exported['history'] = str(self.history.to_csv(output / history_name))

        self.kpis = self.calculate_kpis()
        kpi_file = output / f"{self.model_type}_kpis.json"
        kpi_file.write_text(json.dumps(self.kpis, indent=4, default=str))
        exported['kpis'] = str(kpi_file)

        logger.info(f"Exported {self.model_type} model to {output}")
        return exported
