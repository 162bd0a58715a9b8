"""
Conditional BEGAN Model

The discriminator is an auto-encoder D(x|y) and scores a batch by its mean
per-sample reconstruction norm L_B(x, y) = ||x - D(x|y)||_2. Balance between
the two players is held by the proportional controller

    beta <- clamp(beta + lambda * (gamma * L_B(x, y) - L_B(G(z|y), y)), 0, 1)
"""

import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ...errors import ArgumentError, TrainingDivergenceError
from ...logging_utils import get_logger
from ...neural import autodiff as ad
from ...neural.adam import AdamState, adam_init, adam_step
from ...neural.mlp import MlpNetwork, NetworkKind, forward_graph, mlp_forward, parameter_vars
from ...neural.rng import RngState
from ...data.images import iterate_batches
from ...sensing.noise import NoiseSpec
from ..base.base_model import BaseGenerativeModel
from ..base.base_results import BaseResults
from ..base.training_utils import check_finite, condition_batch, guarded, sample_latent
from ..gan.gan_model import GanTrainConfig

logger = get_logger(__name__)


@dataclass(frozen=True)
class BeganTrainConfig(GanTrainConfig):
    conditional: bool = True
    gamma: float = 0.5
    lambda_gain: float = 0.001
    beta0: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 <= self.beta0 <= 1.0:
            raise ArgumentError("beta0 must lie in [0, 1]")
        if self.gamma < 0 or self.lambda_gain < 0:
            raise ArgumentError("gamma and lambda_gain must be >= 0")


@dataclass(frozen=True)
class BeganState:
    beta: float = 0.0
    gamma: float = 0.5
    lambda_gain: float = 0.001

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ArgumentError(f"beta must lie in [0, 1], got {self.beta}")


@dataclass(frozen=True, eq=False)
class BeganStepResult:
    generator: MlpNetwork
    discriminator: MlpNetwork
    state: BeganState
    loss_d: float
    loss_g: float
    loss_real: float
    loss_fake: float
    g_adam: AdamState
    d_adam: AdamState

    @property
    def beta(self) -> float:
        return self.state.beta


def update_beta(state: BeganState, loss_real: float, loss_fake: float) -> BeganState:
    """Proportional control step on beta, clamped to [0, 1]."""
    beta = state.beta + state.lambda_gain * (state.gamma * loss_real - loss_fake)
    return replace(state, beta=min(1.0, max(0.0, beta)))


def began_diagnostics(state: BeganState, loss_real: float, loss_fake: float) -> Dict[str, float]:
    """Diversity ratio L_B(G)/L_B(x) and convergence measure L_B(x) + |gamma L_B(x) - L_B(G)|."""
    ratio = loss_fake / loss_real if loss_real > 0 else float('inf')
    return {
        'ratio': ratio,
        'convergence': loss_real + abs(state.gamma * loss_real - loss_fake),
    }


def began_reconstruction_graph(D_ae: MlpNetwork, x, y=None, params: Optional[List[ad.Var]] = None) -> ad.Var:
    """Mean over the batch of the unsquared per-sample L2 reconstruction error."""
    x = ad.constant(x)
    if D_ae.output_dim != D_ae.input_dim:
        raise ArgumentError(f"Auto-encoder maps R^{D_ae.input_dim} to R^{D_ae.output_dim}")
    decoded = forward_graph(D_ae, x, y, params)
    return ad.mean(ad.sqrt(ad.sum(ad.square(ad.sub(x, decoded)), axis=1)))


def began_reconstruction_loss(D_ae: MlpNetwork, x: np.ndarray, y: Optional[np.ndarray] = None) -> float:
    """L_B(x, y); a single image (n,) is treated as a batch of one."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if y is not None:
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    return float(began_reconstruction_graph(D_ae, x, y).value)


def began_step(G: MlpNetwork, D_ae: MlpNetwork, state: BeganState, x: np.ndarray, A,
               noise_spec: Optional[NoiseSpec], rng: RngState, cfg: BeganTrainConfig,
               g_adam: Optional[AdamState] = None, d_adam: Optional[AdamState] = None,
               epoch: int = -1, batch: int = -1, loss_trace: Optional[List[float]] = None) -> BeganStepResult:
    """
    One Adam step on L_D = L_B(x) - beta L_B(G(z)) and on L_G = L_B(G(z)),
    both evaluated at the current parameters, then one beta update.
    """
    trace = loss_trace if loss_trace is not None else []
    if g_adam is None:
        g_adam = adam_init(G.params(), cfg.lr, cfg.beta1, cfg.beta2)
    if d_adam is None:
        d_adam = adam_init(D_ae.params(), cfg.lr, cfg.beta1, cfg.beta2)
    x = np.asarray(x, dtype=np.float64)
    y = condition_batch(x, A, noise_spec, rng, cfg.conditional)
    z = sample_latent(rng, x.shape[0], cfg.latent_dim)
    x_fake = mlp_forward(G, z, y)

    d_params = parameter_vars(D_ae)
    g_params = parameter_vars(G)

    def losses():
        real = began_reconstruction_graph(D_ae, x, y, d_params)
        fake = began_reconstruction_graph(D_ae, x_fake, y, d_params)
        loss_d = ad.sub(real, ad.mul(fake, state.beta))
        loss_g = began_reconstruction_graph(D_ae, forward_graph(G, z, y, g_params), y)
        return real, fake, loss_d, loss_g

    real, fake, loss_d, loss_g = guarded(losses, epoch, batch, trace)
    values = (float(loss_d.value), float(loss_g.value), float(real.value), float(fake.value))
    check_finite(values, epoch, batch, trace + list(values[:2]))

    new_d, d_adam = adam_step(D_ae.params(), ad.backward(loss_d, d_params), d_adam)
    new_g, g_adam = adam_step(G.params(), ad.backward(loss_g, g_params), g_adam)
    return BeganStepResult(G.with_params(new_g), D_ae.with_params(new_d),
                           update_beta(state, values[2], values[3]),
                           values[0], values[1], values[2], values[3], g_adam, d_adam)


class BeganModel(BaseGenerativeModel):
    """
    Conditional BEGAN training.

    Generator k(+m) -> n; auto-encoding discriminator n(+m) -> hidden -> k -> hidden -> n.
    """

    history_columns = ['epoch', 'L_D', 'L_G', 'beta', 'wall_ms']

    def __init__(self, model_config: Dict):
        super().__init__(model_config)
        self.conditional = bool(model_config.get('conditional', True))
        self.train_config: Optional[BeganTrainConfig] = None
        self.state = BeganState()
        self.diagnostics: List[Dict[str, Any]] = []

    @property
    def generator(self) -> MlpNetwork:
        return self.networks['generator']

    @property
    def discriminator(self) -> MlpNetwork:
        return self.networks['discriminator']

    def initialize_networks(self, n: int, m: int, rng: RngState) -> None:
        cfg = self.train_config or BeganTrainConfig.from_parameters(self.parameters, conditional=self.conditional)
        condition_dim = m if self.conditional else 0
        self.networks['generator'] = self.build_network('generator', cfg.latent_dim, n, rng.child(1),
                                                        condition_dim, NetworkKind.GENERATOR)
        self.networks['discriminator'] = self.build_network('discriminator', n, n, rng.child(2), condition_dim,
                                                            NetworkKind.DISCRIMINATOR, bottleneck=cfg.latent_dim)

    def train(self, images: np.ndarray, A=None, rng: Optional[RngState] = None, params: Optional[Dict] = None,
              noise_spec: Optional[NoiseSpec] = None,
              checkpoint_dir: Optional[Union[str, Path]] = None) -> BaseResults:
        """
        Run BEGAN epochs; the history records beta after the last step of each epoch.
        """
        if params is not None or not self._parameters_validated:
            self.set_parameters(params or {})
        rng = rng or RngState(0)
        self.train_config = cfg = BeganTrainConfig.from_parameters(self.parameters, conditional=self.conditional)
        if self.conditional and A is None:
            raise ArgumentError("Conditional BEGAN training needs a measurement operator")
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 2 or images.shape[0] == 0:
            raise ArgumentError(f"Expected a non-empty image matrix, got shape {images.shape}")

        if not self.networks:
            self.initialize_networks(images.shape[1], A.m if A is not None else 0, rng)
        G, D = self.generator, self.discriminator
        self.state = state = BeganState(cfg.beta0, cfg.gamma, cfg.lambda_gain)
        spec = noise_spec if cfg.noisy_conditioning else NoiseSpec()
        g_adam = adam_init(G.params(), cfg.lr, cfg.beta1, cfg.beta2)
        d_adam = adam_init(D.params(), cfg.lr, cfg.beta1, cfg.beta2)
        trace: List[float] = []

        logger.info(f"Training {self.model_type}: {images.shape[0]} images, {cfg.epochs} epochs, "
                    f"gamma={cfg.gamma}, lambda={cfg.lambda_gain}")
        self.history.set_status('running')
        try:
            for epoch in range(1, cfg.epochs + 1):
                start = time.perf_counter()
                epoch_rng = rng.child(1000 + epoch)
                step_rng = epoch_rng.child(1)
                d_losses, g_losses, real_losses, fake_losses = [], [], [], []
                for b, batch in enumerate(iterate_batches(images, cfg.batch_size, epoch_rng.child(0))):
                    result = began_step(G, D, state, batch, A, spec, step_rng, cfg, g_adam, d_adam, epoch, b, trace)
                    G, D, state = result.generator, result.discriminator, result.state
                    g_adam, d_adam = result.g_adam, result.d_adam
                    trace.extend([result.loss_d, result.loss_g])
                    d_losses.append(result.loss_d)
                    g_losses.append(result.loss_g)
                    real_losses.append(result.loss_real)
                    fake_losses.append(result.loss_fake)

                wall_ms = (time.perf_counter() - start) * 1000.0
                row = {'epoch': epoch, 'L_D': float(np.mean(d_losses)), 'L_G': float(np.mean(g_losses)),
                       'beta': state.beta, 'wall_ms': wall_ms}
                self.history.add_row(row)
                diagnostics = began_diagnostics(state, float(np.mean(real_losses)), float(np.mean(fake_losses)))
                self.diagnostics.append({'epoch': epoch, **diagnostics})
                logger.info(f"epoch {epoch}/{cfg.epochs}: L_D={row['L_D']:.6f} L_G={row['L_G']:.6f} "
                            f"beta={state.beta:.6f} M={diagnostics['convergence']:.6f} "
                            f"ratio={diagnostics['ratio']:.4f} ({wall_ms:.0f} ms)")
                self.networks['generator'], self.networks['discriminator'] = G, D
                self.state = state
                self.save_checkpoint(epoch, cfg.checkpoint_every, checkpoint_dir)
        except TrainingDivergenceError:
            self.history.set_status('diverged')
            raise

        self.history.set_status('completed')
        return self.history

    def calculate_kpis(self) -> Dict[str, Any]:
        kpis = super().calculate_kpis()
        kpis['final_beta'] = self.state.beta
        if self.diagnostics:
            kpis['final_convergence'] = self.diagnostics[-1]['convergence']
            kpis['final_ratio'] = self.diagnostics[-1]['ratio']
        return kpis
