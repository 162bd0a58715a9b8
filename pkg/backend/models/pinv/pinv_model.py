"""
Pseudo-Inverse Network Model

Fits G+ against a frozen generator by minimising, over sampled (z, nu, y),

    ||G(G+(G(z|y) + nu)|y) - G(z|y)||^2 + lambda * ||G+(G(z|y) + nu) - z||^2

so that G(G+(.)) approximately projects onto the range of G. The
perturbation nu lives in image space R^n. G+ is unconditional unless
conditional_pinv is set, in which case it also receives y.
"""

import math
import time
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from ...errors import ArgumentError, TrainingDivergenceError
from ...logging_utils import get_logger
from ...neural import autodiff as ad
from ...neural.adam import adam_init, adam_step
from ...neural.mlp import Activation, MlpNetwork, NetworkKind, forward_graph, init_mlp, mlp_forward, parameter_vars
from ...neural.rng import RngState, sample_gaussian
from ...data.images import iterate_batches
from ...sensing.noise import FIXED_SIGMA, NoiseSpec, draw_noise, measure
from ..base.base_model import BaseGenerativeModel
from ..base.base_results import BaseResults
from ..base.training_utils import check_finite, guarded, sample_latent

logger = get_logger(__name__)

PINV_HISTORY_COLUMNS = ['epoch', 'loss', 'wall_ms']


@dataclass(frozen=True)
class PinvTrainConfig:
    epochs: int = 100
    batch_size: int = 64
    lambda_latent: float = 0.1
    sigma2_img: float = 1.0
    sigma2_meas: float = 0.0
    conditional_pinv: bool = False
    steps_per_epoch: Optional[int] = None
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.lambda_latent < 0:
            raise ArgumentError("lambda_latent must be >= 0")
        if self.sigma2_img < 0 or self.sigma2_meas < 0:
            raise ArgumentError("Noise variances must be >= 0")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise ArgumentError("steps_per_epoch must be >= 1")

    @classmethod
    def from_parameters(cls, params: Dict[str, Any], **overrides) -> "PinvTrainConfig":
        known = {k: v for k, v in params.items() if k in cls.__dataclass_fields__}
        known.update(overrides)
        return cls(**known)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def pinv_from_discriminator(D: MlpNetwork, latent_dim: int, rng: RngState, condition_dim: int = 0) -> MlpNetwork:
    """Fresh G+ with the discriminator's hidden stack and a linear output of width k."""
    dims = [D.input_dim, *D.layer_dims[1:-1], latent_dim]
    activations = list(D.activations[:-1]) + [Activation("identity")]
    return init_mlp(dims, activations, rng, condition_dim, NetworkKind.PINV)


def pinv_loss_graph(G: MlpNetwork, pinv: MlpNetwork, pinv_params: Optional[List[ad.Var]], z, y, nu,
                    lambda_latent: float) -> ad.Var:
    """Batch mean of the pseudo-inverse objective; G contributes only constants."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    g_condition = y if G.condition_dim > 0 else None
    x_gen = mlp_forward(G, z, g_condition)
    nu = np.broadcast_to(np.asarray(nu, dtype=np.float64), x_gen.shape)
    pinv_condition = y if pinv.condition_dim > 0 else None
    if pinv.input_dim != G.output_dim or pinv.output_dim != G.input_dim:
        raise ArgumentError(f"G+ maps R^{pinv.input_dim} to R^{pinv.output_dim}, "
                            f"G maps R^{G.input_dim} to R^{G.output_dim}")

    z_hat = forward_graph(pinv, x_gen + nu, pinv_condition, pinv_params)
    x_rec = forward_graph(G, z_hat, g_condition)
    loss = ad.mean(ad.sum(ad.square(ad.sub(x_rec, x_gen)), axis=1))
    if lambda_latent > 0:
        latent = ad.mean(ad.sum(ad.square(ad.sub(z_hat, z)), axis=1))
        loss = ad.add(loss, ad.mul(latent, lambda_latent))
    return loss


def pinv_loss(G: MlpNetwork, pinv: MlpNetwork, z: np.ndarray, y: Optional[np.ndarray], nu: np.ndarray,
              lambda_latent: float = 0.1) -> float:
    return float(pinv_loss_graph(G, pinv, None, z, y, nu, lambda_latent).value)


def train_pinv(G: MlpNetwork, cfg: PinvTrainConfig, rng: RngState, images: Optional[np.ndarray] = None,
               A=None, pinv: Optional[MlpNetwork] = None, history: Optional[BaseResults] = None) -> MlpNetwork:
    """
    Fit G+ with G held fixed.

    Args:
        G: Trained generator (never modified)
        cfg: Training configuration
        rng: Random stream; the initial network and each epoch use child streams
        images: Training images; required when G or G+ is conditional, where they
            supply y = A x + eta with eta ~ N(0, sigma2_meas I)
        A: Measurement operator for conditional models
        pinv: Initial network; defaults to a two-hidden-layer leaky_relu MLP n -> k
        history: Filled with one row per epoch when given

    Returns:
        Trained G+
    """
    needs_measurements = G.condition_dim > 0 or cfg.conditional_pinv
    if needs_measurements and (images is None or A is None):
        raise ArgumentError("Conditional pseudo-inverse training needs images and a measurement operator")
    if images is not None:
        images = np.asarray(images, dtype=np.float64)
    if cfg.steps_per_epoch is not None:
        steps = cfg.steps_per_epoch
    elif images is not None and len(images):
        steps = math.ceil(len(images) / cfg.batch_size)
    else:
        raise ArgumentError("Data-free pseudo-inverse training needs steps_per_epoch")

    condition_dim = A.m if cfg.conditional_pinv else 0
    if pinv is None:
        pinv = init_mlp([G.output_dim, 256, 256, G.input_dim],
                        [Activation("leaky_relu"), Activation("leaky_relu"), Activation("identity")],
                        rng.child(3), condition_dim, NetworkKind.PINV)
    if pinv.condition_dim != condition_dim:
        raise ArgumentError(f"G+ condition width {pinv.condition_dim} does not match {condition_dim}")

    meas_spec = NoiseSpec(FIXED_SIGMA, sigma=math.sqrt(cfg.sigma2_meas))
    sigma_img = math.sqrt(cfg.sigma2_img)
    state = adam_init(pinv.params(), cfg.lr, cfg.beta1, cfg.beta2)
    trace: List[float] = []
    checksum = G.checksum()

    logger.info(f"Training pseudo-inverse: {cfg.epochs} epochs x {steps} steps, lambda={cfg.lambda_latent}, "
                f"sigma2_img={cfg.sigma2_img}, conditional={cfg.conditional_pinv}")
    for epoch in range(1, cfg.epochs + 1):
        start = time.perf_counter()
        epoch_rng = rng.child(1000 + epoch)
        step_rng = epoch_rng.child(1)
        batches = iterate_batches(images, cfg.batch_size, epoch_rng.child(0)) if needs_measurements else None
        losses = []
        for step in range(steps):
            y = None
            count = cfg.batch_size
            if batches is not None:
                batch = next(batches, None)
                if batch is None:
                    break
                count = batch.shape[0]
                y = measure(A, batch, draw_noise(meas_spec, A, batch, step_rng))
            z = sample_latent(step_rng, count, G.input_dim)
            nu = sample_gaussian(step_rng, (count, G.output_dim), 0.0, sigma_img)

            params = parameter_vars(pinv)
            loss_var = guarded(lambda: pinv_loss_graph(G, pinv, params, z, y, nu, cfg.lambda_latent),
                               epoch, step, trace)
            loss = float(loss_var.value)
            trace.append(loss)
            check_finite((loss,), epoch, step, trace)
            new_params, state = adam_step(pinv.params(), ad.backward(loss_var, params), state)
            pinv = pinv.with_params(new_params)
            losses.append(loss)

        wall_ms = (time.perf_counter() - start) * 1000.0
        mean_loss = float(np.mean(losses))
        if history is not None:
            history.add_row({'epoch': epoch, 'loss': mean_loss, 'wall_ms': wall_ms})
        logger.info(f"pinv epoch {epoch}/{cfg.epochs}: loss={mean_loss:.6f} ({wall_ms:.0f} ms)")

    if G.checksum() != checksum:
        raise TrainingDivergenceError("Generator parameters changed during pseudo-inverse training",
                                      cfg.epochs, -1, trace)
    return pinv


class PinvModel(BaseGenerativeModel):
    """Pseudo-inverse network trained against a frozen generator."""

    history_columns = PINV_HISTORY_COLUMNS

    def __init__(self, model_config: Dict):
        super().__init__(model_config)
        self.train_config: Optional[PinvTrainConfig] = None

    @property
    def pinv(self) -> MlpNetwork:
        return self.networks['pinv']

    def initialize_network(self, G: MlpNetwork, rng: RngState, condition_dim: int = 0,
                           discriminator: Optional[MlpNetwork] = None) -> MlpNetwork:
        """
        Build G+ from the model's 'pinv' architecture, or from a discriminator's
        hidden stack when one is given.
        """
        if discriminator is not None and discriminator.output_dim == 1:
            net = pinv_from_discriminator(discriminator, G.input_dim, rng.child(3), condition_dim)
        else:
            net = self.build_network('pinv', G.output_dim, G.input_dim, rng.child(3), condition_dim, NetworkKind.PINV)
        self.networks['pinv'] = net
        return net

    def train(self, G: MlpNetwork, images: Optional[np.ndarray] = None, A=None, rng: Optional[RngState] = None,
              params: Optional[Dict] = None, discriminator: Optional[MlpNetwork] = None) -> BaseResults:
        if params is not None or not self._parameters_validated:
            self.set_parameters(params or {})
        rng = rng or RngState(0)
        self.train_config = cfg = PinvTrainConfig.from_parameters(self.parameters)
        if 'pinv' not in self.networks:
            self.initialize_network(G, rng, A.m if cfg.conditional_pinv and A is not None else 0, discriminator)

        self.history.set_status('running')
        try:
            self.networks['pinv'] = train_pinv(G, cfg, rng, images, A, self.pinv, self.history)
        except TrainingDivergenceError:
            self.history.set_status('diverged')
            raise
        self.history.set_status('completed')
        return self.history

    def export_solution(self, output_dir: str, history_name: str = "pinv_history.csv") -> Dict[str, str]:
        return super().export_solution(output_dir, history_name)
