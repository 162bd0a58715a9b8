"""
Multilayer perceptron networks.

An MlpNetwork is an immutable value: layer widths, one activation per affine
layer, weights (out x in) and biases. A conditional network receives its
condition concatenated to the input of the first layer only.
"""

import hashlib
import re
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ArgumentError
from . import autodiff as ad
from .rng import RngState, sample_gaussian

DEFAULT_LEAKY_SLOPE = 0.2

ACTIVATION_TAGS = {"identity": 0, "relu": 1, "leaky_relu": 2, "tanh": 3, "sigmoid": 4}


class NetworkKind(IntEnum):
    GENERATOR = 1
    DISCRIMINATOR = 2
    PINV = 3


@dataclass(frozen=True)
class Activation:
    """Activation tag, with the slope used by leaky_relu."""
    tag: str
    slope: float = DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        if self.tag not in ACTIVATION_TAGS:
            raise ArgumentError(f"Unknown activation '{self.tag}'")

    @classmethod
    def parse(cls, text) -> "Activation":
        """Accepts an Activation, 'relu', 'leaky_relu' or 'leaky_relu(0.1)'."""
        if isinstance(text, Activation):
            return text
        match = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*", str(text))
        if not match:
            raise ArgumentError(f"Cannot parse activation '{text}'")
        tag, slope = match.group(1), match.group(2)
        return cls(tag, float(slope)) if slope is not None else cls(tag)

    def apply(self, x: ad.Var) -> ad.Var:
        if self.tag == "relu":
            return ad.relu(x)
        if self.tag == "leaky_relu":
            return ad.leaky_relu(x, self.slope)
        if self.tag == "tanh":
            return ad.tanh(x)
        if self.tag == "sigmoid":
            return ad.sigmoid(x)
        return ad.identity(x)

    def __str__(self):
        if self.tag == "leaky_relu" and self.slope != DEFAULT_LEAKY_SLOPE:
            return f"leaky_relu({self.slope})"
        return self.tag


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    layer_dims: Tuple[int, ...]
    activations: Tuple[Activation, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    condition_dim: int = 0
    kind: NetworkKind = NetworkKind.GENERATOR
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "activations", tuple(Activation.parse(a) for a in self.activations))
        object.__setattr__(self, "weights", tuple(np.asarray(w, dtype=np.float64) for w in self.weights))
        object.__setattr__(self, "biases", tuple(np.asarray(b, dtype=np.float64) for b in self.biases))
        object.__setattr__(self, "kind", NetworkKind(self.kind))

        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ArgumentError(f"Need at least two positive layer widths, got {dims}")
        if self.condition_dim < 0:
            raise ArgumentError("condition_dim must be >= 0")
        layers = len(dims) - 1
        if len(self.activations) != layers or len(self.weights) != layers or len(self.biases) != layers:
            raise ArgumentError(f"Expected {layers} activations, weights and biases")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = weight_shape(dims, self.condition_dim, i)
            if w.shape != expected or b.shape != (dims[i + 1],):
                raise ArgumentError(
                    f"Layer {i}: weight {w.shape} / bias {b.shape}, expected {expected} / ({dims[i + 1]},)"
                )

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def parameter_count(self) -> int:
        return parameter_count(self.layer_dims, self.condition_dim)

    def params(self) -> List[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...]."""
        flat = []
        for w, b in zip(self.weights, self.biases):
            flat.extend([w, b])
        return flat

    def with_params(self, params: Sequence[np.ndarray]) -> "MlpNetwork":
        if len(params) != 2 * len(self.weights):
            raise ArgumentError(f"Expected {2 * len(self.weights)} parameter arrays, got {len(params)}")
        return MlpNetwork(self.layer_dims, self.activations, tuple(params[0::2]), tuple(params[1::2]),
                          self.condition_dim, self.kind, dict(self.metadata))

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for p in self.params():
            digest.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
        return digest.hexdigest()

    def describe(self) -> dict:
        return {
            "kind": self.kind.name.lower(),
            "layer_dims": list(self.layer_dims),
            "activations": [str(a) for a in self.activations],
            "condition_dim": self.condition_dim,
            "parameter_count": self.parameter_count,
        }


def weight_shape(layer_dims: Sequence[int], condition_dim: int, layer: int) -> Tuple[int, int]:
    extra = condition_dim if layer == 0 else 0
    return int(layer_dims[layer + 1]), int(layer_dims[layer]) + extra


def parameter_count(layer_dims: Sequence[int], condition_dim: int = 0) -> int:
    total = 0
    for i in range(len(layer_dims) - 1):
        rows, cols = weight_shape(layer_dims, condition_dim, i)
        total += rows * cols + rows
    return total


def init_mlp(layer_dims: Sequence[int], activations: Sequence, rng: RngState, condition_dim: int = 0,
             kind: NetworkKind = NetworkKind.GENERATOR) -> MlpNetwork:
    """Xavier-normal weights, zero biases."""
    weights, biases = [], []
    for i in range(len(layer_dims) - 1):
        rows, cols = weight_shape(layer_dims, condition_dim, i)
        std = np.sqrt(2.0 / (rows + cols))
        weights.append(sample_gaussian(rng, (rows, cols), 0.0, std))
        biases.append(np.zeros(rows))
    return MlpNetwork(tuple(layer_dims), tuple(activations), tuple(weights), tuple(biases), condition_dim, kind)


def parameter_vars(net: MlpNetwork) -> List[ad.Var]:
    """Fresh differentiable leaves for every parameter, in params() order."""
    return [ad.variable(p) for p in net.params()]


def _check_condition(net: MlpNetwork, batch: int, condition) -> None:
    if net.condition_dim == 0:
        if condition is not None:
            raise ArgumentError("Unconditional network does not accept a condition")
        return
    if condition is None:
        raise ArgumentError(f"Network expects a condition of width {net.condition_dim}")
    shape = condition.shape if isinstance(condition, ad.Var) else np.shape(condition)
    if len(shape) != 2 or shape[1] != net.condition_dim or shape[0] != batch:
        raise ArgumentError(f"Condition shape {shape} does not match ({batch}, {net.condition_dim})")


def forward_graph(net: MlpNetwork, x, condition=None, params: Optional[Sequence[ad.Var]] = None,
                  dropout_rate: float = 0.0, rng: Optional[RngState] = None) -> ad.Var:
    """
    Record the forward pass on the tape.

    Args:
        net: Network
        x: Input batch (C x layer_dims[0]), array or Var
        condition: Condition batch (C x condition_dim), present iff condition_dim > 0
        params: Parameter leaves from parameter_vars(); network values are constants otherwise
        dropout_rate: Inverted dropout on hidden layer outputs (needs rng)
        rng: Stream for dropout masks

    Returns:
        Output node (C x layer_dims[-1])
    """
    x = ad.constant(x)
    if x.value.ndim != 2 or x.shape[1] != net.input_dim:
        raise ArgumentError(f"Input shape {x.shape} does not match width {net.input_dim}")
    _check_condition(net, x.shape[0], condition)
    if params is None:
        params = [ad.constant(p) for p in net.params()]

    h = x if condition is None else ad.concat([x, condition], axis=1)
    layers = len(net.weights)
    for i in range(layers):
        h = ad.affine(h, params[2 * i], params[2 * i + 1])
        h = net.activations[i].apply(h)
        if dropout_rate > 0 and i < layers - 1:
            if rng is None:
                raise ArgumentError("Dropout requires an rng")
            keep = (rng.uniform(h.shape) >= dropout_rate) / (1.0 - dropout_rate)
            h = ad.mul(h, keep)
    return h


def mlp_forward(net: MlpNetwork, input, condition=None) -> np.ndarray:
    """
    Evaluate the network.

    A 1-D input is treated as a batch of one and a 1-D output is returned.
    """
    single = np.ndim(input) == 1
    x = np.atleast_2d(np.asarray(input, dtype=np.float64))
    if condition is not None:
        condition = np.atleast_2d(np.asarray(condition, dtype=np.float64))
    out = forward_graph(net, x, condition).value
    return out[0] if single else out
