"""
Neural core: float64 arrays, reverse-mode autodiff, MLPs, Adam, deterministic
RNG and the GPCS weights format.
"""

from .adam import AdamState, adam_init, adam_step
from .autodiff import Var, backward, constant, grad, matmul, value_and_grad, variable
from .mlp import (Activation, MlpNetwork, NetworkKind, forward_graph, init_mlp,
                  mlp_forward, parameter_count, parameter_vars)
from .rng import RngState, derive_seed, sample_gaussian
from .weights_io import deserialize_weights, load_weights, save_weights, serialize_weights

__all__ = [
    'AdamState', 'adam_init', 'adam_step',
    'Var', 'backward', 'constant', 'grad', 'matmul', 'value_and_grad', 'variable',
    'Activation', 'MlpNetwork', 'NetworkKind', 'forward_graph', 'init_mlp',
    'mlp_forward', 'parameter_count', 'parameter_vars',
    'RngState', 'derive_seed', 'sample_gaussian',
    'deserialize_weights', 'load_weights', 'save_weights', 'serialize_weights',
]
