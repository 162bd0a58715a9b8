"""
Deterministic random number generation.

RngState wraps numpy's counter-based Philox bit generator so that a seed maps
to the same uniform stream on every platform. Normal samples are produced
with a fixed Box-Muller transform rather than numpy's ziggurat sampler.
"""

from typing import Sequence, Tuple, Union

import numpy as np

from ..errors import ArgumentError

Shape = Union[int, Sequence[int], Tuple[int, ...]]


def derive_seed(seed: int, stream_id: int) -> int:
    """Child seed = hash(seed, stream_id), stable across runs and platforms."""
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream_id)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _normalize_shape(shape: Shape) -> Tuple[int, ...]:
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    shape = tuple(int(s) for s in shape)
    if any(s < 0 for s in shape):
        raise ArgumentError(f"Invalid shape {shape}")
    return shape


class RngState:
    """
    Seeded random stream.

    Never share an instance between concurrent consumers; derive a child with
    child(stream_id) instead.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._generator = np.random.Generator(np.random.Philox(self.seed))

    def child(self, stream_id: int) -> "RngState":
        return RngState(derive_seed(self.seed, stream_id))

    def uniform(self, shape: Shape) -> np.ndarray:
        """Uniform samples in [0, 1)."""
        return self._generator.random(_normalize_shape(shape))

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of range(n) via a stable argsort of uniforms."""
        return np.argsort(self.uniform(n), kind="stable")

    def __repr__(self):
        return f"RngState(seed={self.seed})"


def sample_gaussian(rng: RngState, shape: Shape, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    """
    Draw i.i.d. N(mean, std^2) samples with the Box-Muller transform.

    Args:
        rng: Random stream, advanced deterministically
        shape: Output shape
        mean: Distribution mean
        std: Standard deviation, must be >= 0

    Returns:
        float64 array of the requested shape
    """
    if std < 0:
        raise ArgumentError(f"Standard deviation must be >= 0, got {std}")
    shape = _normalize_shape(shape)
    count = int(np.prod(shape, dtype=np.int64))
    pairs = (count + 1) // 2

    u1 = 1.0 - rng.uniform(pairs)  # (0, 1]
    u2 = rng.uniform(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2

    samples = np.empty(2 * pairs, dtype=np.float64)
    samples[0::2] = radius * np.cos(angle)
    samples[1::2] = radius * np.sin(angle)
    return (mean + std * samples[:count]).reshape(shape)
