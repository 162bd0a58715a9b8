"""
Model Factory for Dynamic Model Creation

This factory creates generative model instances from the registry in
config/models.yaml and the per-kind JSON configurations in
backend/config/models/.
"""

import copy
import json
from pathlib import Path
from typing import Any, Dict, Optional, Type, Union

import yaml

from ..errors import ArgumentError
from ..logging_utils import get_logger
from ..models.base.base_model import BaseGenerativeModel
from ..models.began.began_model import BeganModel
from ..models.gan.gan_model import GanModel
from ..models.pinv.pinv_model import PinvModel

logger = get_logger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent

MODEL_CLASSES: Dict[str, Type[BaseGenerativeModel]] = {
    'GanModel': GanModel,
    'BeganModel': BeganModel,
    'PinvModel': PinvModel,
}


class ModelFactory:
    """
    Factory class for creating generative model instances.

    Configs are loaded from every JSON file in the config directory; the YAML
    registry maps each model type to its implementing class.
    """

    def __init__(self, config_dir: Optional[Union[str, Path]] = None,
                 registry_path: Optional[Union[str, Path]] = None):
        """
        Initialize the model factory.

        Args:
            config_dir: Directory containing model configuration files
            registry_path: YAML registry of model types
        """
        self.config_dir = Path(config_dir) if config_dir else Path(__file__).parent.parent / "config" / "models"
        self.registry_path = Path(registry_path) if registry_path else PROJECT_ROOT / "config" / "models.yaml"
        self._model_configs: Dict[str, Dict] = {}
        self._registry: Dict[str, Dict] = {}
        self._model_classes: Dict[str, Type[BaseGenerativeModel]] = {}
        self._load_model_configs()
        self._register_model_classes()

    def _load_model_configs(self) -> None:
        """Load all model configuration files."""
        if not self.config_dir.exists():
            logger.warning(f"Model config directory {self.config_dir} does not exist")
            return

        for config_file in sorted(self.config_dir.glob("*.json")):
            try:
                config = json.loads(config_file.read_text())
            except (OSError, json.JSONDecodeError) as e:
                logger.error(f"Error loading config file {config_file}: {e}")
                continue
            model_type = config.get('type')
            if model_type:
                self._model_configs[model_type] = config
                logger.debug(f"Loaded config for model type: {model_type}")
            else:
                logger.warning(f"No 'type' field in config file {config_file}")

    def _register_model_classes(self) -> None:
        """Register the classes named in the YAML registry."""
        if self.registry_path.exists():
            registry = yaml.safe_load(self.registry_path.read_text()) or {}
            self._registry = registry.get('models', {})
        else:
            logger.warning(f"Model registry {self.registry_path} not found; using built-in defaults")
            self._registry = {
                'gan': {'class': 'GanModel'}, 'cgan': {'class': 'GanModel'},
                'began-c': {'class': 'BeganModel'}, 'pinv': {'class': 'PinvModel'},
            }

        for model_type, entry in self._registry.items():
            class_name = entry.get('class')
            if class_name in MODEL_CLASSES and entry.get('status', 'active') == 'active':
                self._model_classes[model_type] = MODEL_CLASSES[class_name]
            else:
                logger.debug(f"Model type '{model_type}' not available (class {class_name})")

    def get_model_config(self, model_type: str) -> Optional[Dict]:
        return self._model_configs.get(model_type)

    def create_model(self, model_type: str,
                     architecture: Optional[Dict[str, Dict]] = None) -> BaseGenerativeModel:
        """
        Create an instance of the specified model type.

        Args:
            model_type: Registered type (gan, cgan, began-c, pinv)
            architecture: Per-section overrides merged into the configured architecture

        Raises:
            ArgumentError: unknown or unregistered model type
        """
        if model_type not in self._model_configs:
            raise ArgumentError(f"Model type '{model_type}' not found in configurations "
                                f"(known: {sorted(self._model_configs)})")
        if model_type not in self._model_classes:
            raise ArgumentError(f"Model class for '{model_type}' not registered")

        config = copy.deepcopy(self._model_configs[model_type])
        for section, overrides in (architecture or {}).items():
            config.setdefault('architecture', {}).setdefault(section, {}).update(overrides)
        model = self._model_classes[model_type](config)
        logger.debug(f"Created {model_type} model instance")
        return model

    def is_model_available(self, model_type: str) -> bool:
        return model_type in self._model_configs and model_type in self._model_classes

    def validate_model_config(self, model_type: str) -> Dict[str, Any]:
        """
        Validate a model configuration.

        Returns:
            {'valid': bool, 'errors': [...], 'warnings': [...]}
        """
        if model_type not in self._model_configs:
            return {'valid': False, 'errors': [f"Model type '{model_type}' not found"], 'warnings': []}

        config = self._model_configs[model_type]
        errors, warnings = [], []
        for field in ('type', 'name', 'description', 'parameters', 'architecture'):
            if field not in config:
                errors.append(f"Missing required field: {field}")
        for param_name, param_config in config.get('parameters', {}).items():
            if 'type' not in param_config:
                errors.append(f"Parameter '{param_name}' missing type")
            if 'label' not in param_config:
                warnings.append(f"Parameter '{param_name}' missing label")
        return {'valid': not errors, 'errors': errors, 'warnings': warnings}


# Global factory instance
_factory_instance: Optional[ModelFactory] = None


def get_model_factory() -> ModelFactory:
    global _factory_instance
    if _factory_instance is None:
        _factory_instance = ModelFactory()
    return _factory_instance


def create_model(model_type: str, architecture: Optional[Dict[str, Dict]] = None) -> BaseGenerativeModel:
    """Convenience function to create a model instance."""
    return get_model_factory().create_model(model_type, architecture)
