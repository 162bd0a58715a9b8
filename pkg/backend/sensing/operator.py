"""
Gaussian measurement operators for the forward model y = A x + eta.
"""

from dataclasses import dataclass
from typing import Any, Dict

import numpy as np
from scipy import linalg

from ..errors import ArgumentError
from ..neural.autodiff import matmul
from ..neural.rng import RngState, sample_gaussian


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    matrix: np.ndarray
    m: int
    n: int
    seed: int
    orthogonalized: bool = False

    def __post_init__(self):
        if self.matrix.shape != (self.m, self.n):
            raise ArgumentError(f"Matrix shape {self.matrix.shape} != ({self.m}, {self.n})")
        if not 1 <= self.m <= self.n:
            raise ArgumentError(f"Need 1 <= m <= n, got m={self.m}, n={self.n}")

    @property
    def ratio(self) -> float:
        return self.m / self.n

    def describe(self) -> Dict[str, Any]:
        """Manifest entry: the operator is re-created from seed and dimensions."""
        return {"m": self.m, "n": self.n, "seed": self.seed, "orthogonalized": self.orthogonalized}

    @classmethod
    def from_description(cls, description: Dict[str, Any]) -> "MeasurementOperator":
        return make_measurement_operator(int(description["m"]), int(description["n"]),
                                         RngState(int(description["seed"])),
                                         orthogonalize=bool(description.get("orthogonalized", False)))


def make_measurement_operator(m: int, n: int, rng: RngState, orthogonalize: bool = False) -> MeasurementOperator:
    """
    Draw A with i.i.d. N(0, 1/m) entries.

    Args:
        m: Number of measurements (1 <= m <= n)
        n: Ambient dimension
        rng: Random stream; its seed is recorded on the operator
        orthogonalize: Replace A by a matrix with orthonormal rows scaled by sqrt(n/m)

    Returns:
        MeasurementOperator
    """
    if m < 1 or m > n:
        raise ArgumentError(f"Need 1 <= m <= n, got m={m}, n={n}")
    seed = rng.seed
    matrix = sample_gaussian(rng, (m, n), 0.0, 1.0 / np.sqrt(m))
    if orthogonalize:
        q, _ = linalg.qr(matrix.T, mode="economic")
        matrix = np.sqrt(n / m) * q.T
    return MeasurementOperator(matrix, m, n, seed, orthogonalize)


def apply_operator(A, x: np.ndarray) -> np.ndarray:
    """A x for a single signal (n,) or a row batch (C x n)."""
    matrix = A.matrix if isinstance(A, MeasurementOperator) else np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return matmul(matrix, x[:, None])[:, 0]
    return matmul(x, matrix.T)


def adjoint(A, v: np.ndarray) -> np.ndarray:
    """A^T v for a single vector (m,) or a row batch (C x m)."""
    matrix = A.matrix if isinstance(A, MeasurementOperator) else np.asarray(A, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        return matmul(matrix.T, v[:, None])[:, 0]
    return matmul(v, matrix)
