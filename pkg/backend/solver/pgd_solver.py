"""
Projected Gradient Descent with a generative prior.

Each outer iteration takes a gradient step on f(x) = ||A x - y||^2,

    w_n = x_n + mu * A^T (y - A x_n),

and projects w_n onto the range of G by minimising ||w_n - G(z|y)||^2 over z
with an inner optimiser. The projection can be replaced by any callable
(exact oracles, or the learned projector of the network-based variant).
"""

import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import ArgumentError, SolverError
from ..logging_utils import get_logger
from ..models.base.base_solver import BaseSolver
from ..neural import autodiff as ad
from ..neural.adam import adam_init, adam_step
from ..neural.mlp import MlpNetwork, forward_graph, mlp_forward
from ..neural.rng import RngState, sample_gaussian
from ..sensing.operator import adjoint, apply_operator

logger = get_logger(__name__)

INIT_ZERO = "zero"
INIT_AT_Y = "at_y"
AUTO_STEP = "auto"

# (x_projected, z or None)
ProjectFn = Callable[[np.ndarray], Tuple[np.ndarray, Optional[np.ndarray]]]


@dataclass(frozen=True)
class SolverConfig:
    outer_iters: int = 30
    step: Union[float, str] = 0.5
    init_policy: str = INIT_ZERO
    inner_iters: int = 100
    inner_lr: float = 0.01
    inner_warm_start: bool = True
    inner_optimizer: str = "gd"
    restarts: int = 0
    seed: int = 0
    beta_hat: Optional[float] = None

    def __post_init__(self):
        if self.outer_iters < 1:
            raise ArgumentError("outer_iters must be >= 1")
        if self.step != AUTO_STEP and not (isinstance(self.step, (int, float)) and self.step > 0):
            raise ArgumentError(f"step must be positive or '{AUTO_STEP}', got {self.step!r}")
        if self.init_policy not in (INIT_ZERO, INIT_AT_Y):
            raise ArgumentError(f"init_policy must be '{INIT_ZERO}' or '{INIT_AT_Y}'")
        if self.inner_iters < 1:
            raise ArgumentError("inner_iters must be >= 1")
        if self.inner_lr <= 0:
            raise ArgumentError("inner_lr must be > 0")
        if self.inner_optimizer not in ("gd", "adam"):
            raise ArgumentError("inner_optimizer must be 'gd' or 'adam'")
        if self.restarts < 0:
            raise ArgumentError("restarts must be >= 0")

    def step_size(self) -> float:
        """mu; 'auto' resolves to 1 / beta_hat."""
        if self.step == AUTO_STEP:
            if not self.beta_hat or self.beta_hat <= 0:
                raise ArgumentError("step='auto' needs a positive beta_hat estimate")
            return 1.0 / self.beta_hat
        return float(self.step)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "SolverConfig":
        known = {k: v for k, v in (values or {}).items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SolverTrace:
    """Per outer iteration (index 0 is the initial point): f(x_n), MSE and wall time."""
    f_xn: List[float] = field(default_factory=list)
    mse: List[float] = field(default_factory=list)
    wall_ms: List[float] = field(default_factory=list)
    x_hat: Optional[np.ndarray] = None
    z_hat: Optional[np.ndarray] = None
    iterates: List[np.ndarray] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.f_xn)

    def record(self, x: np.ndarray, f_value: float, mse: float, wall_ms: float, keep: bool) -> None:
        self.f_xn.append(f_value)
        self.mse.append(mse)
        self.wall_ms.append(wall_ms)
        if keep:
            self.iterates.append(x.copy())

    @property
    def total_wall_ms(self) -> float:
        return float(np.sum(self.wall_ms))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'iter': np.arange(len(self.f_xn)), 'f_xn': self.f_xn,
                             'mse': self.mse, 'wall_ms': self.wall_ms})

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path


def measurement_loss(A, x: np.ndarray, y: np.ndarray) -> float:
    """f(x) = ||A x - y||^2."""
    r = apply_operator(A, x) - y
    return float(r @ r)


def gradient_step(x: np.ndarray, A, y: np.ndarray, mu: float) -> np.ndarray:
    """w = x + mu * A^T (y - A x)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ax = apply_operator(A, x)
    if ax.shape != y.shape:
        raise ArgumentError(f"Measurement shape {y.shape} does not match A x shape {ax.shape}")
    return x + mu * adjoint(A, y - ax)


def _condition(G: MlpNetwork, y: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if G.condition_dim == 0:
        return None
    if y is None:
        raise ArgumentError("Conditional generator needs the measurement y")
    return np.asarray(y, dtype=np.float64).reshape(1, -1)


def inner_descent(G: MlpNetwork, w: np.ndarray, y: Optional[np.ndarray], z0: np.ndarray,
                  cfg: SolverConfig) -> Tuple[np.ndarray, List[float]]:
    """
    Minimise ||w - G(z|y)||^2 over z from z0.

    Returns:
        (final z, losses at every inner iterate including the final one)
    """
    target = np.asarray(w, dtype=np.float64).reshape(1, -1)
    condition = _condition(G, y)
    z = np.asarray(z0, dtype=np.float64).reshape(1, -1)
    if z.shape[1] != G.input_dim:
        raise ArgumentError(f"Latent initialisation has width {z.shape[1]}, expected {G.input_dim}")

    def objective(zv):
        return ad.sum(ad.square(ad.sub(forward_graph(G, zv, condition), target)))

    state = adam_init([z], cfg.inner_lr, beta1=0.9) if cfg.inner_optimizer == "adam" else None
    losses = []
    for iteration in range(cfg.inner_iters):
        loss, (g,) = ad.value_and_grad(objective, z)
        if not math.isfinite(loss) or not np.all(np.isfinite(g)):
            raise SolverError(f"Non-finite inner projection loss {loss}", iteration)
        losses.append(loss)
        if state is None:
            z = z - cfg.inner_lr * g
        else:
            (z,), state = adam_step([z], [g], state)

    final = float(objective(ad.constant(z)).value)
    if not math.isfinite(final):
        raise SolverError(f"Non-finite inner projection loss {final}", cfg.inner_iters)
    losses.append(final)
    return z[0], losses


def project_inner(G: MlpNetwork, w: np.ndarray, y: Optional[np.ndarray] = None, cfg: SolverConfig = None,
                  rng: Optional[RngState] = None,
                  z_init: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Approximate projection of w onto range(G(.|y)).

    Starts from z_init (warm start) or a fresh N(0, I_k) draw; with restarts
    the best of 1 + restarts runs (extra runs start from fresh draws) is kept.

    Returns:
        (G(z*|y), z*)
    """
    cfg = cfg or SolverConfig()
    rng = rng or RngState(cfg.seed)
    k = G.input_dim
    starts = [np.asarray(z_init, dtype=np.float64) if z_init is not None else sample_gaussian(rng, k)]
    starts.extend(sample_gaussian(rng, k) for _ in range(cfg.restarts))

    best_z, best_loss = None, math.inf
    for start in starts:
        z, losses = inner_descent(G, w, y, start, cfg)
        if losses[-1] < best_loss:
            best_z, best_loss = z, losses[-1]
    return mlp_forward(G, best_z[None, :], _condition(G, y))[0], best_z


def initial_point(A, y: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    if cfg.init_policy == INIT_AT_Y:
        return adjoint(A, y)
    matrix = A.matrix if hasattr(A, 'matrix') else np.asarray(A)
    return np.zeros(matrix.shape[1])


def run_projected_descent(A, y: np.ndarray, cfg: SolverConfig, project: ProjectFn,
                          x_true: Optional[np.ndarray] = None, keep_iterates: bool = False,
                          label: str = "pgd") -> SolverTrace:
    """
    Outer loop shared by both solvers.

    Args:
        A: Measurement operator
        y: Measurement vector (m,)
        cfg: Outer-loop settings (outer_iters, step, init_policy)
        project: Maps w_n to (x_{n+1}, z_{n+1})
        x_true: Ground truth for the MSE column (NaN when absent)
        keep_iterates: Store every x_n on the trace
        label: Name used in log lines

    Returns:
        SolverTrace with outer_iters + 1 entries
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ArgumentError(f"Expected a single measurement vector, got shape {y.shape}")
    mu = cfg.step_size()
    x = initial_point(A, y, cfg)

    def mse_of(x_n):
        if x_true is None:
            return math.nan
        d = x_n - x_true
        return float(d @ d)

    trace = SolverTrace()
    trace.record(x, measurement_loss(A, x, y), mse_of(x), 0.0, keep_iterates)
    z = None
    for iteration in range(1, cfg.outer_iters + 1):
        start = time.perf_counter()
        w = gradient_step(x, A, y, mu)
        x, z = project(w)
        wall_ms = (time.perf_counter() - start) * 1000.0
        if not np.all(np.isfinite(x)):
            raise SolverError(f"{label} produced a non-finite estimate", iteration)
        f_value = measurement_loss(A, x, y)
        trace.record(x, f_value, mse_of(x), wall_ms, keep_iterates)
        logger.debug(f"{label} iteration {iteration}: f={f_value:.6e} ({wall_ms:.2f} ms)")

    trace.x_hat = x
    trace.z_hat = z
    return trace


def pgd_reconstruct(G: MlpNetwork, A, y: np.ndarray, cfg: Optional[SolverConfig] = None,
                    rng: Optional[RngState] = None, x_true: Optional[np.ndarray] = None,
                    projector: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    keep_iterates: bool = False) -> SolverTrace:
    """
    Projected gradient descent with inner latent-space projection.

    The inner latent is drawn fresh at the first outer iteration and
    warm-started afterwards unless inner_warm_start is off. A `projector`
    callable replaces the inner optimisation entirely.
    """
    cfg = cfg or SolverConfig()
    rng = rng or RngState(cfg.seed)
    state = {'z': None}

    def project(w):
        if projector is not None:
            return np.asarray(projector(w), dtype=np.float64), None
        z_init = state['z'] if cfg.inner_warm_start else None
        x, state['z'] = project_inner(G, w, y, cfg, rng, z_init)
        return x, state['z']

    return run_projected_descent(A, y, cfg, project, x_true, keep_iterates, "pgd")


class PgdSolver(BaseSolver):
    """PGD bound to a generator and a measurement operator."""

    solver_name = 'pgd'

    def __init__(self, G: MlpNetwork, A, solver_config: Optional[SolverConfig] = None,
                 projector: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        super().__init__(solver_config or SolverConfig())
        self.G = G
        self.A = A
        self.projector = projector

    def validate_input(self, y: np.ndarray) -> Dict[str, Any]:
        errors, warnings = [], []
        y = np.asarray(y)
        matrix = self.A.matrix if hasattr(self.A, 'matrix') else np.asarray(self.A)
        if y.shape != (matrix.shape[0],):
            errors.append(f"Measurement shape {y.shape} does not match ({matrix.shape[0]},)")
        elif not np.all(np.isfinite(y)):
            errors.append("Measurement contains non-finite values")
        if self.G.output_dim != matrix.shape[1]:
            errors.append(f"Generator output width {self.G.output_dim} != operator width {matrix.shape[1]}")
        if self.G.condition_dim not in (0, matrix.shape[0]):
            errors.append(f"Generator condition width {self.G.condition_dim} != m = {matrix.shape[0]}")
        return {'valid': not errors, 'errors': errors, 'warnings': warnings}

    def solve(self, y: np.ndarray, x_true: Optional[np.ndarray] = None, rng: Optional[RngState] = None,
              keep_iterates: bool = False) -> SolverTrace:
        validation = self.validate_input(y)
        if not validation['valid']:
            raise ArgumentError('; '.join(validation['errors']))
        return pgd_reconstruct(self.G, self.A, y, self.solver_config, rng, x_true, self.projector, keep_iterates)
