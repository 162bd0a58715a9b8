"""
Synthetic linear manifold {W z + b} with orthonormal W.

It admits closed-form projection and pseudo-inverse, and is therefore the
reference instance for checking solvers and certification numerically.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import ArgumentError
from ..neural.mlp import Activation, MlpNetwork, NetworkKind
from ..neural.rng import RngState, sample_gaussian


@dataclass(frozen=True, eq=False)
class SyntheticManifold:
    W: np.ndarray  # n x k, orthonormal columns
    b: np.ndarray  # n
    seed: int

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def k(self) -> int:
        return self.W.shape[1]

    def exact_project(self, x: np.ndarray) -> np.ndarray:
        """W W^T (x - b) + b, row-wise for batches."""
        x = np.asarray(x, dtype=np.float64)
        return (x - self.b) @ self.W @ self.W.T + self.b

    def exact_pinv(self, x: np.ndarray) -> np.ndarray:
        """W^T (x - b), row-wise for batches."""
        return (np.asarray(x, dtype=np.float64) - self.b) @ self.W

    def generate(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) @ self.W.T + self.b

    def sample(self, count: int, rng: RngState) -> np.ndarray:
        return self.generate(sample_gaussian(rng, (count, self.k)))

    def generator_network(self) -> MlpNetwork:
        """G(z) = W z + b as a single identity-activation layer."""
        return MlpNetwork((self.k, self.n), (Activation("identity"),), (self.W.copy(),), (self.b.copy(),),
                          0, NetworkKind.GENERATOR)

    def pinv_network(self) -> MlpNetwork:
        """G+(x) = W^T x - W^T b as a single identity-activation layer."""
        return MlpNetwork((self.n, self.k), (Activation("identity"),), (self.W.T.copy(),), (-self.W.T @ self.b,),
                          0, NetworkKind.PINV)


def make_synthetic_manifold(n: int, k: int, rng: RngState, offset_scale: float = 1.0) -> SyntheticManifold:
    """Orthonormalise a Gaussian n x k matrix column-wise; offset b ~ N(0, offset_scale^2)."""
    if k < 1 or k > n:
        raise ArgumentError(f"Need 1 <= k <= n, got k={k}, n={n}")
    seed = rng.seed
    q, _ = linalg.qr(sample_gaussian(rng, (n, k)), mode="economic")
    b = sample_gaussian(rng, n, 0.0, offset_scale)
    return SyntheticManifold(q, b, seed)
