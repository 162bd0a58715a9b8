"""
Base Parameters Class

This module provides schema-driven parameter validation for training and
solver configurations. Schemas come from the model JSON configs in
backend/config/models/.
"""

from typing import Any, Dict, List


class BaseParameters:
    """
    Base class for handling model parameters.

    Validates values against a JSON schema and coerces them to the declared types.
    """

    def __init__(self, parameter_schema: Dict = None):
        """
        Initialize the parameters handler.

        Args:
            parameter_schema: Dictionary defining parameter schema
        """
        self.parameter_schema = parameter_schema or {}
        self.parameters = {}
        self.validation_errors = []
        self.validation_warnings = []

    def set_parameter(self, name: str, value: Any) -> bool:
        """
        Set a single parameter value.

        Args:
            name: Parameter name
            value: Parameter value

        Returns:
            True (unknown names are kept but produce a warning)
        """
        if name not in self.parameter_schema:
            self.validation_warnings.append(f"Unknown parameter: {name}")

        self.parameters[name] = value
        return True

    def set_parameters(self, params: Dict[str, Any]) -> bool:
        success = True
        for name, value in params.items():
            if not self.set_parameter(name, value):
                success = False
        return success

    def validate_parameters(self) -> Dict[str, Any]:
        """
        Validate all parameters against the schema and fill in defaults.

        Returns:
            {
                'valid': bool,
                'errors': List[str],
                'warnings': List[str],
                'processed_params': Dict
            }
        """
        errors = []
        warnings = list(self.validation_warnings)
        processed = {}

        for param_name, param_config in self.parameter_schema.items():
            value = self.parameters.get(param_name)
            label = param_config.get('label', param_name)

            if value is None or value == "":
                if param_config.get('required', False) and param_config.get('default') is None:
                    errors.append(f"Required parameter '{label}' is missing")
                elif 'default' in param_config:
                    processed[param_name] = param_config['default']
                continue

            result = self._validate_single_parameter(label, value, param_config)
            errors.extend(result['errors'])
            warnings.extend(result['warnings'])
            if not result['errors']:
                processed[param_name] = result['value']

        for param_name, value in self.parameters.items():
            if param_name not in self.parameter_schema:
                processed[param_name] = value

        self.validation_errors = errors
        self.validation_warnings = warnings

        return {
            'valid': len(errors) == 0,
            'errors': errors,
            'warnings': warnings,
            'processed_params': processed
        }

    def _validate_single_parameter(self, name: str, value: Any, config: Dict) -> Dict[str, Any]:
        """
        Validate and coerce a single parameter.

        Args:
            name: Parameter label used in messages
            value: Parameter value
            config: Parameter configuration

        Returns:
            Dictionary with errors, warnings and the coerced value
        """
        errors: List[str] = []
        warnings: List[str] = []
        param_type = config.get('type', 'string')
        coerced = value

        if param_type in ('float', 'integer'):
            try:
                coerced = float(value) if param_type == 'float' else int(value)
                if param_type == 'integer' and float(value) != coerced:
                    raise ValueError
            except (ValueError, TypeError):
                kind = "a number" if param_type == 'float' else "an integer"
                errors.append(f"Parameter '{name}' must be {kind}")
                return {'errors': errors, 'warnings': warnings, 'value': value}

            min_val = config.get('min')
            max_val = config.get('max')
            if min_val is not None and coerced < min_val:
                errors.append(f"Parameter '{name}' must be >= {min_val}")
            if max_val is not None and coerced > max_val:
                errors.append(f"Parameter '{name}' must be <= {max_val}")
            if config.get('exclusive_max') is not None and coerced >= config['exclusive_max']:
                errors.append(f"Parameter '{name}' must be < {config['exclusive_max']}")

        elif param_type == 'boolean':
            if isinstance(value, str):
                if value.lower() not in ('true', 'false', '1', '0', 'yes', 'no'):
                    errors.append(f"Parameter '{name}' must be a boolean")
                coerced = value.lower() in ('true', '1', 'yes')
            else:
                coerced = bool(value)

        else:
            coerced = str(value)

        return {'errors': errors, 'warnings': warnings, 'value': coerced}
