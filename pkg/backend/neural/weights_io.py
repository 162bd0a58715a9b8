"""
GPCS weights file format (version 1), all integers little-endian:

    offset 0   4 bytes   magic "GPCS"
           4   u32       version = 1
           8   u32       network kind (1 generator, 2 discriminator, 3 pinv)
          12   u32       condition_dim
          16   u32       layer count L
               L x u32   layer widths
               L x u8    activation tags (tag 0 is the input layer, always identity)
               then per affine layer: weight matrix (row-major f64) followed by bias vector
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import (ArgumentError, WeightsFormatError, WeightsMagicError,
                      WeightsTruncatedError, WeightsVersionError)
from .mlp import (ACTIVATION_TAGS, DEFAULT_LEAKY_SLOPE, Activation, MlpNetwork,
                  NetworkKind, weight_shape)

MAGIC = b"GPCS"
VERSION = 1
# Largest layer or condition width a header may declare.
MAX_WIDTH = 2 ** 24

_TAG_NAMES = {code: name for name, code in ACTIVATION_TAGS.items()}


def serialize_weights(net: MlpNetwork) -> bytes:
    for act in net.activations:
        if act.tag == "leaky_relu" and act.slope != DEFAULT_LEAKY_SLOPE:
            raise ArgumentError(f"Weights format v{VERSION} only stores leaky_relu slope {DEFAULT_LEAKY_SLOPE}")

    dims = net.layer_dims
    header = MAGIC + struct.pack("<IIII", VERSION, int(net.kind), net.condition_dim, len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    tags = [ACTIVATION_TAGS["identity"]] + [ACTIVATION_TAGS[a.tag] for a in net.activations]
    header += struct.pack(f"<{len(tags)}B", *tags)

    chunks = [header]
    for w, b in zip(net.weights, net.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(chunks)


def deserialize_weights(data: bytes) -> MlpNetwork:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise WeightsMagicError("Bad magic, expected b'GPCS'", offset=0)
    if len(data) < 20:
        raise WeightsTruncatedError("Truncated header", offset=len(data))

    version, kind, condition_dim, layer_count = struct.unpack_from("<IIII", data, 4)
    if version != VERSION:
        raise WeightsVersionError(f"Unsupported version {version}, expected {VERSION}", offset=4)
    if kind not in {k.value for k in NetworkKind}:
        raise WeightsFormatError(f"Unknown network kind tag {kind}", offset=8)
    if layer_count < 2:
        raise WeightsFormatError(f"Layer count {layer_count} < 2", offset=16)

    offset = 20
    if len(data) < offset + 5 * layer_count:
        raise WeightsTruncatedError("Truncated header", offset=len(data))
    dims = struct.unpack_from(f"<{layer_count}I", data, offset)
    for i, width in enumerate(dims):
        if not 1 <= width <= MAX_WIDTH:
            raise WeightsFormatError(f"Layer width {width} outside [1, {MAX_WIDTH}]", offset=offset + 4 * i)
    if condition_dim > MAX_WIDTH:
        raise WeightsFormatError(f"Condition width {condition_dim} exceeds {MAX_WIDTH}", offset=12)
    offset += 4 * layer_count
    tags = struct.unpack_from(f"<{layer_count}B", data, offset)
    offset += layer_count

    activations = []
    for i, tag in enumerate(tags[1:], start=1):
        if tag not in _TAG_NAMES:
            raise WeightsFormatError(f"Unknown activation tag {tag}", offset=20 + 4 * layer_count + i)
        activations.append(Activation(_TAG_NAMES[tag]))

    shapes = [weight_shape(dims, condition_dim, i) for i in range(layer_count - 1)]
    payload = sum(8 * (rows * cols + rows) for rows, cols in shapes)
    if len(data) < offset + payload:
        raise WeightsTruncatedError(f"Truncated payload, header declares {payload} bytes", offset=len(data))

    weights, biases = [], []
    for rows, cols in shapes:
        for shape, target in (((rows, cols), weights), ((rows,), biases)):
            count = rows * cols if len(shape) == 2 else rows
            target.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset)
                          .astype(np.float64).reshape(shape))
            offset += 8 * count

    if offset != len(data):
        raise WeightsFormatError(f"{len(data) - offset} trailing bytes", offset=offset)

    return MlpNetwork(tuple(dims), tuple(activations), tuple(weights), tuple(biases),
                      condition_dim, NetworkKind(kind))


def save_weights(path: Union[str, Path], net: MlpNetwork) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_weights(net))
    return path


def load_weights(path: Union[str, Path]) -> MlpNetwork:
    return deserialize_weights(Path(path).read_bytes())
