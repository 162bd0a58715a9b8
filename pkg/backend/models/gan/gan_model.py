"""
Minimax GAN Model

Unconditional GAN and measurement-conditional GAN G(z|y), y = A x + eta.
The discriminator minimises binary cross-entropy; the generator minimises the
non-saturating loss -log D(G(z|y)|y). The saturating form log(1 - D(G(z|y)|y))
is only logged at DEBUG level.
"""

import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ...errors import ArgumentError, TrainingDivergenceError
from ...logging_utils import get_logger
from ...neural import autodiff as ad
from ...neural.adam import AdamState, adam_init, adam_step
from ...neural.mlp import MlpNetwork, NetworkKind, forward_graph, mlp_forward, parameter_vars
from ...neural.rng import RngState, sample_gaussian
from ...data.images import iterate_batches
from ...sensing.noise import NoiseSpec
from ..base.base_model import BaseGenerativeModel
from ..base.base_results import BaseResults
from ..base.training_utils import (check_finite, condition_batch, guarded, safe_log, safe_log1m,
                                   sample_latent)

logger = get_logger(__name__)


@dataclass(frozen=True)
class GanTrainConfig:
    epochs: int = 200
    batch_size: int = 64
    latent_dim: int = 64
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    conditional: bool = False
    label_smoothing: float = 0.0
    input_noise_std: float = 0.0
    dropout_rate: float = 0.0
    noisy_conditioning: bool = False
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.latent_dim < 1:
            raise ArgumentError("latent_dim must be >= 1")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ArgumentError("label_smoothing must lie in [0, 1)")
        if self.input_noise_std < 0:
            raise ArgumentError("input_noise_std must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ArgumentError("dropout_rate must lie in [0, 1)")

    @classmethod
    def from_parameters(cls, params: Dict[str, Any], **overrides) -> "GanTrainConfig":
        known = {k: v for k, v in params.items() if k in cls.__dataclass_fields__}
        known.update(overrides)
        return cls(**known)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _perturb(x, std: float, rng: Optional[RngState]):
    if std <= 0:
        return x
    if rng is None:
        raise ArgumentError("Input noise requires an rng")
    return ad.add(x, sample_gaussian(rng, x.shape if isinstance(x, ad.Var) else np.shape(x), 0.0, std))


def discriminator_loss_graph(D: MlpNetwork, d_params: List[ad.Var], x_real, x_fake, y=None,
                             label_smoothing: float = 0.0, input_noise_std: float = 0.0,
                             dropout_rate: float = 0.0, rng: Optional[RngState] = None) -> ad.Var:
    """
    -(log D(x|y) + log(1 - D(x_fake|y))) / 2, averaged over the batch.

    With label smoothing s the real target is 1 - s.
    """
    d_real = forward_graph(D, _perturb(x_real, input_noise_std, rng), y, d_params, dropout_rate, rng)
    d_fake = forward_graph(D, _perturb(x_fake, input_noise_std, rng), y, d_params, dropout_rate, rng)
    real_term = safe_log(d_real)
    if label_smoothing > 0:
        target = 1.0 - label_smoothing
        real_term = ad.add(ad.mul(real_term, target), ad.mul(safe_log1m(d_real), label_smoothing))
    return ad.mul(ad.add(ad.mean(real_term), ad.mean(safe_log1m(d_fake))), -0.5)


def generator_loss_graph(G: MlpNetwork, g_params: List[ad.Var], D: MlpNetwork, z, y=None,
                         input_noise_std: float = 0.0, dropout_rate: float = 0.0,
                         rng: Optional[RngState] = None) -> Tuple[ad.Var, ad.Var]:
    """
    Non-saturating generator loss -mean log D(G(z|y)|y).

    Returns:
        (loss node, discriminator output node)
    """
    x_fake = forward_graph(G, z, y, g_params)
    d_fake = forward_graph(D, _perturb(x_fake, input_noise_std, rng), y, None, dropout_rate, rng)
    return ad.neg(ad.mean(safe_log(d_fake))), d_fake


def discriminator_loss(D: MlpNetwork, x_real: np.ndarray, x_fake: np.ndarray, y: Optional[np.ndarray] = None,
                       label_smoothing: float = 0.0) -> float:
    """Binary cross-entropy of D on a real and a generated batch (no noise, no dropout)."""
    params = [ad.constant(p) for p in D.params()]
    return float(discriminator_loss_graph(D, params, x_real, x_fake, y, label_smoothing).value)


def discriminator_step(D: MlpNetwork, G: MlpNetwork, x: np.ndarray, A, noise_spec: Optional[NoiseSpec],
                       rng: RngState, cfg: GanTrainConfig, adam_state: Optional[AdamState] = None,
                       epoch: int = -1, batch: int = -1,
                       loss_trace: Optional[List[float]] = None) -> Tuple[float, MlpNetwork, AdamState]:
    """
    One Adam step of the discriminator on a real batch and a fresh generated batch.

    G is only evaluated; its parameters are never touched.

    Returns:
        (loss before the step, updated D, updated Adam state)
    """
    trace = loss_trace if loss_trace is not None else []
    if adam_state is None:
        adam_state = adam_init(D.params(), cfg.lr, cfg.beta1, cfg.beta2)
    x = np.asarray(x, dtype=np.float64)
    y = condition_batch(x, A, noise_spec, rng, cfg.conditional)
    x_fake = mlp_forward(G, sample_latent(rng, x.shape[0], cfg.latent_dim), y)

    params = parameter_vars(D)
    loss_var = guarded(lambda: discriminator_loss_graph(D, params, x, x_fake, y, cfg.label_smoothing,
                                                        cfg.input_noise_std, cfg.dropout_rate, rng),
                       epoch, batch, trace)
    loss = float(loss_var.value)
    check_finite((loss,), epoch, batch, trace + [loss])

    new_params, adam_state = adam_step(D.params(), ad.backward(loss_var, params), adam_state)
    return loss, D.with_params(new_params), adam_state


def generator_step(G: MlpNetwork, D: MlpNetwork, x: np.ndarray, A, noise_spec: Optional[NoiseSpec],
                   rng: RngState, cfg: GanTrainConfig, adam_state: Optional[AdamState] = None,
                   epoch: int = -1, batch: int = -1,
                   loss_trace: Optional[List[float]] = None) -> Tuple[float, MlpNetwork, AdamState]:
    """
    One Adam step of the generator.

    The real batch x only supplies the conditioning measurements (and the
    batch size); D is evaluated with constant parameters.

    Returns:
        (loss before the step, updated G, updated Adam state)
    """
    trace = loss_trace if loss_trace is not None else []
    if adam_state is None:
        adam_state = adam_init(G.params(), cfg.lr, cfg.beta1, cfg.beta2)
    x = np.asarray(x, dtype=np.float64)
    y = condition_batch(x, A, noise_spec, rng, cfg.conditional)
    z = sample_latent(rng, x.shape[0], cfg.latent_dim)

    params = parameter_vars(G)
    loss_var, d_fake = guarded(lambda: generator_loss_graph(G, params, D, z, y, cfg.input_noise_std,
                                                            cfg.dropout_rate, rng),
                               epoch, batch, trace)
    loss = float(loss_var.value)
    check_finite((loss,), epoch, batch, trace + [loss])
    if logger.isEnabledFor(logging.DEBUG):
        saturating = float(np.mean(np.log(1.0 - d_fake.value + 1e-12)))
        logger.debug(f"epoch {epoch} batch {batch}: saturating generator loss {saturating:.6f}")

    new_params, adam_state = adam_step(G.params(), ad.backward(loss_var, params), adam_state)
    return loss, G.with_params(new_params), adam_state


class GanModel(BaseGenerativeModel):
    """
    GAN / conditional GAN training.

    The model config's 'conditional' flag selects G(z|y) and D(x|y) with the
    measurement y concatenated to the first layer of both networks.
    """

    history_columns = ['epoch', 'L_D', 'L_G', 'wall_ms']

    def __init__(self, model_config: Dict):
        super().__init__(model_config)
        self.conditional = bool(model_config.get('conditional', False))
        self.train_config: Optional[GanTrainConfig] = None

    @property
    def generator(self) -> MlpNetwork:
        return self.networks['generator']

    @property
    def discriminator(self) -> MlpNetwork:
        return self.networks['discriminator']

    def initialize_networks(self, n: int, m: int, rng: RngState) -> None:
        """Fresh generator (k -> n) and discriminator (n -> 1), conditioned on R^m when conditional."""
        cfg = self.train_config or GanTrainConfig.from_parameters(self.parameters, conditional=self.conditional)
        condition_dim = m if self.conditional else 0
        self.networks['generator'] = self.build_network('generator', cfg.latent_dim, n, rng.child(1),
                                                        condition_dim, NetworkKind.GENERATOR)
        self.networks['discriminator'] = self.build_network('discriminator', n, 1, rng.child(2),
                                                            condition_dim, NetworkKind.DISCRIMINATOR)

    def train(self, images: np.ndarray, A=None, rng: Optional[RngState] = None, params: Optional[Dict] = None,
              noise_spec: Optional[NoiseSpec] = None,
              checkpoint_dir: Optional[Union[str, Path]] = None) -> BaseResults:
        """
        Alternate one discriminator and one generator step per batch.

        Args:
            images: Training images, one normalised image per row
            A: Measurement operator (required when conditional)
            rng: Master stream; networks and epochs use derived child streams
            params: Training parameters (validated against the model schema)
            noise_spec: Conditioning noise, used when noisy_conditioning is set
            checkpoint_dir: Where to write checkpoints every checkpoint_every epochs

        Returns:
            Per-epoch history with columns epoch, L_D, L_G, wall_ms
        """
        if params is not None or not self._parameters_validated:
            self.set_parameters(params or {})
        rng = rng or RngState(0)
        self.train_config = cfg = GanTrainConfig.from_parameters(self.parameters, conditional=self.conditional)
        if self.conditional and A is None:
            raise ArgumentError("Conditional GAN training needs a measurement operator")
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 2 or images.shape[0] == 0:
            raise ArgumentError(f"Expected a non-empty image matrix, got shape {images.shape}")

        if not self.networks:
            self.initialize_networks(images.shape[1], A.m if A is not None else 0, rng)
        G, D = self.generator, self.discriminator
        spec = noise_spec if cfg.noisy_conditioning else NoiseSpec()
        d_state = adam_init(D.params(), cfg.lr, cfg.beta1, cfg.beta2)
        g_state = adam_init(G.params(), cfg.lr, cfg.beta1, cfg.beta2)
        trace: List[float] = []

        logger.info(f"Training {self.model_type}: {images.shape[0]} images, {cfg.epochs} epochs, "
                    f"batch {cfg.batch_size}, k={cfg.latent_dim}")
        self.history.set_status('running')
        try:
            for epoch in range(1, cfg.epochs + 1):
                start = time.perf_counter()
                epoch_rng = rng.child(1000 + epoch)
                step_rng = epoch_rng.child(1)
                d_losses, g_losses = [], []
                for b, batch in enumerate(iterate_batches(images, cfg.batch_size, epoch_rng.child(0))):
                    loss_d, D, d_state = discriminator_step(D, G, batch, A, spec, step_rng, cfg, d_state,
                                                            epoch, b, trace)
                    trace.append(loss_d)
                    loss_g, G, g_state = generator_step(G, D, batch, A, spec, step_rng, cfg, g_state,
                                                        epoch, b, trace)
                    trace.append(loss_g)
                    d_losses.append(loss_d)
                    g_losses.append(loss_g)

                wall_ms = (time.perf_counter() - start) * 1000.0
                row = {'epoch': epoch, 'L_D': float(np.mean(d_losses)), 'L_G': float(np.mean(g_losses)),
                       'wall_ms': wall_ms}
                self.history.add_row(row)
                logger.info(f"epoch {epoch}/{cfg.epochs}: L_D={row['L_D']:.6f} L_G={row['L_G']:.6f} "
                            f"({wall_ms:.0f} ms)")
                self.networks['generator'], self.networks['discriminator'] = G, D
                self.save_checkpoint(epoch, cfg.checkpoint_every, checkpoint_dir)
        except TrainingDivergenceError:
            self.history.set_status('diverged')
            raise

        self.history.set_status('completed')
        return self.history
