import math
from typing import Optional

import numpy as np
import pytest

from ..data.synthetic import make_synthetic_manifold
from ..errors import ArgumentError, TrainingDivergenceError
from ..neural import autodiff as ad
from ..neural.gradcheck import max_relative_error
from ..neural.mlp import Activation, MlpNetwork, NetworkKind, init_mlp, mlp_forward
from ..neural.rng import RngState, sample_gaussian
from ..sensing.operator import make_measurement_operator
from ..services.model_factory import ModelFactory, create_model
from .base import BaseParameters, BaseResults
from .began import (BeganState, BeganTrainConfig, began_diagnostics, began_reconstruction_graph,
                    began_reconstruction_loss, began_step, update_beta)
from .gan import (GanTrainConfig, discriminator_loss, discriminator_loss_graph, discriminator_step,
                  generator_loss_graph, generator_step)
from .pinv import PinvTrainConfig, pinv_from_discriminator, pinv_loss, pinv_loss_graph, train_pinv

ACTIVATION_TAGS = ["identity", "relu", "leaky_relu", "tanh", "sigmoid"]
KINKED = {"relu", "leaky_relu"}
# Pre-activations of relu-family units stay this far from the kink, well above
# what an FD_STEP parameter perturbation can move them.
KINK_MARGIN = 1e-4
FD_STEP = 1e-6
CHECKED_ENTRIES = 6
GRAD_TOLERANCE = 1e-5

TINY_ARCHITECTURE = {
    'generator': {'hidden': [6], 'hidden_activation': 'tanh'},
    'discriminator': {'hidden': [6], 'hidden_activation': 'tanh'},
}


def kink_distance(net: MlpNetwork, x: np.ndarray, condition: Optional[np.ndarray] = None) -> float:
    """Smallest |pre-activation| of relu-family units when net is evaluated on x."""
    h = np.asarray(x, dtype=np.float64)
    if condition is not None:
        h = np.concatenate([h, condition], axis=1)
    closest = math.inf
    for w, b, act in zip(net.weights, net.biases, net.activations):
        pre = h @ w.T + b
        if act.tag in KINKED:
            closest = min(closest, float(np.min(np.abs(pre))))
        h = act.apply(ad.constant(pre)).value
    return closest


def with_random_biases(net: MlpNetwork, rng: RngState) -> MlpNetwork:
    params = net.params()
    for i in range(1, len(params), 2):
        params[i] = sample_gaussian(rng.child(i), params[i].shape, 0.0, 0.1)
    return net.with_params(params)


def network_shape(seed: int):
    """
    Depth 1..4 and widths 1..64 cycle with the seed; the first hidden layer
    walks through every activation tag, later ones are drawn at random.
    """
    rng = RngState(seed)
    pick = rng.uniform(6)
    depth = 1 + seed % 4
    widths = [1 + (13 * seed) % 64] + [1 + int(u * 64) for u in rng.uniform(depth - 2)] if depth > 1 else []
    tags = [ACTIVATION_TAGS[(seed // 4) % 5]] + [ACTIVATION_TAGS[int(u * 5)] for u in rng.uniform(depth - 2)] \
        if depth > 1 else []
    return {
        'n': 2 + int(pick[0] * 63), 'k': 1 + int(pick[1] * 8), 'm': int(pick[2] * 4),
        'batch': 1 + int(pick[3] * 3), 'widths': widths, 'tags': tags,
        'smoothing': 0.1 if pick[4] < 0.5 else 0.0,
    }


def _draw_setup(shape, rng: RngState):
    n, k, m, widths, tags = shape['n'], shape['k'], shape['m'], shape['widths'], shape['tags']
    ae_widths, ae_tags = widths[:1], tags[:1]
    G = init_mlp([k, *widths, n], [*tags, "tanh"], rng.child(1), m)
    D = init_mlp([n, *widths, 1], [*tags, "sigmoid"], rng.child(2), m, NetworkKind.DISCRIMINATOR)
    D_ae = init_mlp([n, *ae_widths, k, *ae_widths, n], [*ae_tags, "identity", *ae_tags, "tanh"],
                    rng.child(3), m, NetworkKind.DISCRIMINATOR)
    P = init_mlp([n, *widths, k], [*tags, "identity"], rng.child(4), 0, NetworkKind.PINV)
    G, D, D_ae, P = (with_random_biases(net, rng.child(10 + i)) for i, net in enumerate((G, D, D_ae, P)))
    data = rng.child(5)
    batch = shape['batch']
    return {
        'G': G, 'D': D, 'D_ae': D_ae, 'P': P,
        'x': np.tanh(sample_gaussian(data, (batch, n))),
        'x_fake': np.tanh(sample_gaussian(data, (batch, n))),
        'z': sample_gaussian(data, (batch, k)),
        'nu': sample_gaussian(data, (batch, n), 0.0, 0.3),
        'y': sample_gaussian(data, (batch, m)) if m else None,
        'smoothing': shape['smoothing'],
    }


def kink_clearance(s) -> float:
    """Distance to the nearest kink over every forward pass the four losses make."""
    G, D, D_ae, P, y = s['G'], s['D'], s['D_ae'], s['P'], s['y']
    x_gen = mlp_forward(G, s['z'], y)
    z_hat = mlp_forward(P, x_gen + s['nu'])
    return min(kink_distance(D, s['x'], y), kink_distance(D, s['x_fake'], y), kink_distance(D, x_gen, y),
               kink_distance(G, s['z'], y), kink_distance(G, z_hat, y),
               kink_distance(D_ae, s['x'], y), kink_distance(P, x_gen + s['nu']))


def random_setup(seed: int):
    """Random networks and batches for one seed, redrawn until no unit sits on a kink."""
    shape = network_shape(seed)
    rng = RngState(seed)
    for attempt in range(200):
        s = _draw_setup(shape, rng.child(100 + attempt))
        if kink_clearance(s) > KINK_MARGIN:
            return s
    pytest.fail(f"No kink-free draw for seed {seed}")


class TestLossGradients:
    def test_configurations_cover_every_tag_and_size(self):
        shapes = [network_shape(seed) for seed in range(100)]
        assert {tag for s in shapes for tag in s['tags']} == set(ACTIVATION_TAGS)
        assert max(len(s['widths']) + 1 for s in shapes) == 4
        assert max(w for s in shapes for w in s['widths']) == 64
        assert max(s['n'] for s in shapes) <= 64

    @pytest.mark.parametrize("seed", range(100))
    def test_every_loss_against_finite_differences(self, seed):
        s = random_setup(seed)
        G, D, D_ae, P, y = s['G'], s['D'], s['D_ae'], s['P'], s['y']
        check = RngState(seed).child(7)

        def d_loss(*params):
            return discriminator_loss_graph(D, list(params), s['x'], s['x_fake'], y, s['smoothing'])

        def g_loss(*params):
            return generator_loss_graph(G, list(params), D, s['z'], y)[0]

        def b_loss(*params):
            return began_reconstruction_graph(D_ae, s['x'], y, list(params))

        def p_loss(*params):
            return pinv_loss_graph(G, P, list(params), s['z'], y, s['nu'], 0.1)

        for loss, net, stream in ((d_loss, D, 1), (g_loss, G, 2), (b_loss, D_ae, 3), (p_loss, P, 4)):
            error = max_relative_error(loss, *net.params(), h=FD_STEP, max_entries=CHECKED_ENTRIES,
                                       rng=check.child(stream))
            assert error < GRAD_TOLERANCE, loss.__name__



def half_discriminator(n: int) -> MlpNetwork:
    """D(x) = sigmoid(0) = 1/2 everywhere."""
    return MlpNetwork((n, 1), (Activation("sigmoid"),), (np.zeros((1, n)),), (np.zeros(1),), 0,
                      NetworkKind.DISCRIMINATOR)


class TestGan:
    def test_undecided_discriminator_costs_log_two(self):
        D = half_discriminator(4)
        x = np.ones((3, 4))
        assert discriminator_loss(D, x, -x) == pytest.approx(math.log(2.0), abs=1e-9)
        G = init_mlp([2, 4], ["tanh"], RngState(0))
        loss, _ = generator_loss_graph(G, None, D, np.zeros((3, 2)))
        assert float(loss.value) == pytest.approx(math.log(2.0), abs=1e-9)

    def test_losses_ignore_batch_order(self):
        rng = RngState(40)
        D = init_mlp([6, 8, 1], ["leaky_relu", "sigmoid"], rng.child(1), 2, NetworkKind.DISCRIMINATOR)
        D_ae = init_mlp([6, 3, 6], ["identity", "tanh"], rng.child(2), 2, NetworkKind.DISCRIMINATOR)
        x, x_fake = np.tanh(sample_gaussian(rng.child(3), (7, 6))), np.tanh(sample_gaussian(rng.child(4), (7, 6)))
        y = sample_gaussian(rng.child(5), (7, 2))
        order = rng.child(6).permutation(7)
        assert discriminator_loss(D, x[order], x_fake[order], y[order], 0.1) == pytest.approx(
            discriminator_loss(D, x, x_fake, y, 0.1), rel=1e-12)
        assert began_reconstruction_loss(D_ae, x[order], y[order]) == pytest.approx(
            began_reconstruction_loss(D_ae, x, y), rel=1e-12)

    def test_steps_return_new_networks(self):
        rng = RngState(1)
        cfg = GanTrainConfig(latent_dim=2, lr=1e-2)
        G = init_mlp([2, 5, 4], ["relu", "tanh"], rng.child(1))
        D = init_mlp([4, 5, 1], ["leaky_relu", "sigmoid"], rng.child(2), kind=NetworkKind.DISCRIMINATOR)
        x = np.tanh(sample_gaussian(rng, (6, 4)))
        g_sum, d_sum = G.checksum(), D.checksum()

        loss_d, D2, d_state = discriminator_step(D, G, x, None, None, rng.child(3), cfg)
        loss_g, G2, g_state = generator_step(G, D2, x, None, None, rng.child(4), cfg)
        assert math.isfinite(loss_d) and math.isfinite(loss_g)
        assert G.checksum() == g_sum and D.checksum() == d_sum
        assert D2.checksum() != d_sum and G2.checksum() != g_sum
        assert d_state.t == 1 and g_state.t == 1

    def test_conditional_step_needs_operator(self):
        cfg = GanTrainConfig(latent_dim=2, conditional=True)
        G = init_mlp([2, 4], ["tanh"], RngState(0), condition_dim=3)
        D = init_mlp([4, 1], ["sigmoid"], RngState(1), condition_dim=3, kind=NetworkKind.DISCRIMINATOR)
        with pytest.raises(ArgumentError):
            discriminator_step(D, G, np.zeros((2, 4)), None, None, RngState(2), cfg)

    def test_nan_batch_is_divergence(self):
        cfg = GanTrainConfig(latent_dim=2)
        G = init_mlp([2, 4], ["tanh"], RngState(0))
        D = init_mlp([4, 1], ["sigmoid"], RngState(1), kind=NetworkKind.DISCRIMINATOR)
        x = np.full((2, 4), np.nan)
        with pytest.raises(TrainingDivergenceError):
            discriminator_step(D, G, x, None, None, RngState(2), cfg, epoch=3, batch=1)

    def test_config_validation(self):
        with pytest.raises(ArgumentError):
            GanTrainConfig(label_smoothing=1.0)
        with pytest.raises(ArgumentError):
            GanTrainConfig(batch_size=0)

    def test_cgan_training_through_factory(self, tmp_path):
        A = make_measurement_operator(3, 8, RngState(0))
        images = np.tanh(sample_gaussian(RngState(1), (20, 8)))
        model = create_model('cgan', TINY_ARCHITECTURE)
        history = model.train(images, A, RngState(2), {'epochs': 2, 'batch_size': 8, 'latent_dim': 2})
        assert [row['epoch'] for row in history.rows] == [1, 2]
        assert model.generator.condition_dim == 3
        assert model.sample(5, RngState(3), np.zeros((5, 3))).shape == (5, 8)
        exported = model.export_solution(str(tmp_path))
        assert (tmp_path / "generator.gpcs").exists()
        assert set(exported) >= {'generator', 'discriminator', 'history', 'kpis'}

    def test_conditional_training_needs_operator(self):
        model = create_model('cgan', TINY_ARCHITECTURE)
        with pytest.raises(ArgumentError):
            model.train(np.zeros((4, 8)), None, RngState(0), {'epochs': 1, 'latent_dim': 2})

    def test_same_seed_same_weights(self):
        images = np.tanh(sample_gaussian(RngState(1), (12, 6)))
        runs = []
        for _ in range(2):
            model = create_model('gan', TINY_ARCHITECTURE)
            model.train(images, None, RngState(9), {'epochs': 2, 'batch_size': 5, 'latent_dim': 2})
            runs.append((model.generator.checksum(), model.discriminator.checksum()))
        assert runs[0] == runs[1]


class TestBegan:
    def test_beta_fixed_point(self):
        state = BeganState(0.3, 0.5, 0.01)
        assert update_beta(state, 2.0, 1.0).beta == pytest.approx(0.3)

    def test_beta_moves_and_clamps(self):
        state = BeganState(0.3, 0.5, 0.01)
        assert update_beta(state, 2.0, 0.0).beta == pytest.approx(0.31)
        assert update_beta(state, 0.0, 2.0).beta == pytest.approx(0.28)
        assert update_beta(BeganState(0.999, 0.5, 1.0), 10.0, 0.0).beta == 1.0
        assert update_beta(BeganState(0.001, 0.5, 1.0), 0.0, 10.0).beta == 0.0

    def test_beta_range_checked(self):
        with pytest.raises(ArgumentError):
            BeganState(1.5)
        with pytest.raises(ArgumentError):
            BeganTrainConfig(beta0=-0.1)

    def test_reconstruction_norm_is_unsquared(self):
        # Zero auto-encoder: L_B is the mean Euclidean norm of the inputs.
        D = MlpNetwork((2, 2), (Activation("identity"),), (np.zeros((2, 2)),), (np.zeros(2),), 0,
                       NetworkKind.DISCRIMINATOR)
        x = np.array([[3.0, 4.0], [0.0, 1.0]])
        assert began_reconstruction_loss(D, x) == pytest.approx(3.0)
        assert began_reconstruction_loss(D, x[0]) == pytest.approx(5.0)

    def test_diagnostics(self):
        d = began_diagnostics(BeganState(0.0, 0.5), 2.0, 0.5)
        assert d['ratio'] == pytest.approx(0.25)
        assert d['convergence'] == pytest.approx(2.5)

    def test_step_updates_both_players(self):
        rng = RngState(4)
        A = make_measurement_operator(2, 5, rng.child(0))
        cfg = BeganTrainConfig(latent_dim=2, lr=1e-2, lambda_gain=0.1)
        G = init_mlp([2, 4, 5], ["relu", "tanh"], rng.child(1), 2)
        D = init_mlp([5, 4, 2, 4, 5], ["relu", "identity", "relu", "tanh"], rng.child(2), 2,
                     NetworkKind.DISCRIMINATOR)
        x = np.tanh(sample_gaussian(rng, (4, 5)))
        result = began_step(G, D, BeganState(0.0, cfg.gamma, cfg.lambda_gain), x, A, None, rng.child(3), cfg)
        assert result.generator.checksum() != G.checksum()
        assert result.discriminator.checksum() != D.checksum()
        expected = min(1.0, max(0.0, 0.1 * (cfg.gamma * result.loss_real - result.loss_fake)))
        assert result.beta == pytest.approx(expected)
        assert result.loss_d == pytest.approx(result.loss_real)

    def test_training_keeps_beta_in_range(self):
        A = make_measurement_operator(3, 8, RngState(0))
        images = np.tanh(sample_gaussian(RngState(1), (16, 8)))
        model = create_model('began-c', TINY_ARCHITECTURE)
        history = model.train(images, A, RngState(2), {'epochs': 3, 'batch_size': 4, 'latent_dim': 2,
                                                       'lambda_gain': 0.5})
        assert all(0.0 <= row['beta'] <= 1.0 for row in history.rows)
        assert model.discriminator.output_dim == 8
        assert 'final_beta' in model.calculate_kpis()


class TestPinv:
    def test_recovers_linear_inverse(self):
        manifold = make_synthetic_manifold(4, 2, RngState(0), offset_scale=0.3)
        G = manifold.generator_network()
        checksum = G.checksum()
        P0 = init_mlp([4, 2], ["identity"], RngState(1), kind=NetworkKind.PINV)
        cfg = PinvTrainConfig(epochs=60, batch_size=32, lambda_latent=0.1, sigma2_img=0.0, steps_per_epoch=10,
                              lr=0.02, beta1=0.9)
        z = sample_gaussian(RngState(2), (64, 2))
        before = pinv_loss(G, P0, z, None, np.zeros(4))

        P = train_pinv(G, cfg, RngState(3), pinv=P0)
        after = pinv_loss(G, P, z, None, np.zeros(4))
        assert after < 1e-2 and after < 1e-2 * before
        assert np.allclose(mlp_forward(P, manifold.generate(z)), z, atol=0.25)
        assert G.checksum() == checksum

    def test_data_free_training_needs_step_count(self):
        G = make_synthetic_manifold(4, 2, RngState(0)).generator_network()
        with pytest.raises(ArgumentError):
            train_pinv(G, PinvTrainConfig(epochs=1), RngState(0))

    def test_conditional_generator_needs_images(self):
        G = init_mlp([2, 4], ["tanh"], RngState(0), condition_dim=3)
        with pytest.raises(ArgumentError):
            train_pinv(G, PinvTrainConfig(epochs=1, steps_per_epoch=1), RngState(0))

    def test_exact_inverse_has_zero_loss(self):
        manifold = make_synthetic_manifold(6, 3, RngState(5))
        z = sample_gaussian(RngState(6), (4, 3))
        loss = pinv_loss(manifold.generator_network(), manifold.pinv_network(), z, None, np.zeros(6))
        assert loss == pytest.approx(0.0, abs=1e-20)

    def test_network_from_discriminator(self):
        D = init_mlp([8, 5, 1], ["leaky_relu", "sigmoid"], RngState(0), kind=NetworkKind.DISCRIMINATOR)
        P = pinv_from_discriminator(D, 3, RngState(1))
        assert P.layer_dims == (8, 5, 3)
        assert P.activations[-1].tag == "identity"
        assert P.kind == NetworkKind.PINV

    def test_model_trains_and_exports(self, tmp_path):
        manifold = make_synthetic_manifold(4, 2, RngState(0))
        model = create_model('pinv', {'pinv': {'hidden': [4]}})
        history = model.train(manifold.generator_network(), None, None, RngState(1),
                              {'epochs': 2, 'steps_per_epoch': 3, 'batch_size': 4})
        assert len(history.rows) == 2
        model.export_solution(str(tmp_path))
        assert (tmp_path / "pinv.gpcs").exists()
        assert (tmp_path / "pinv_history.csv").exists()


class TestBaseClasses:
    SCHEMA = {
        'epochs': {'type': 'integer', 'label': 'Epochs', 'min': 1, 'default': 10},
        'lr': {'type': 'float', 'min': 0.0, 'exclusive_max': 1.0, 'default': 0.001},
        'flag': {'type': 'boolean', 'default': False},
    }

    def test_defaults_and_coercion(self):
        handler = BaseParameters(self.SCHEMA)
        handler.set_parameters({'lr': '0.5', 'flag': 'yes'})
        result = handler.validate_parameters()
        assert result['valid']
        assert result['processed_params'] == {'epochs': 10, 'lr': 0.5, 'flag': True}

    def test_range_errors(self):
        handler = BaseParameters(self.SCHEMA)
        handler.set_parameters({'epochs': 0, 'lr': 1.0})
        result = handler.validate_parameters()
        assert not result['valid']
        assert len(result['errors']) == 2

    def test_model_rejects_invalid_parameters(self):
        model = create_model('gan')
        with pytest.raises(ArgumentError):
            model.set_parameters({'epochs': 0})

    def test_results_kpis_and_csv(self, tmp_path):
        results = BaseResults(['epoch', 'loss', 'wall_ms'])
        results.add_row({'epoch': 1, 'loss': 2.0, 'wall_ms': 5.0, 'ignored': 1})
        results.add_row({'epoch': 2, 'loss': 1.0, 'wall_ms': 7.0})
        kpis = results.calculate_kpis()
        assert kpis['final_loss'] == 1.0 and kpis['min_loss'] == 1.0
        assert kpis['total_wall_ms'] == 12.0
        path = results.to_csv(tmp_path / "h.csv")
        assert path.read_text().splitlines()[0] == "epoch,loss,wall_ms"


class TestModelFactory:
    def test_registered_models(self):
        factory = ModelFactory()
        for kind in ('gan', 'cgan', 'began-c', 'pinv'):
            assert factory.is_model_available(kind)
            assert factory.validate_model_config(kind)['valid']

    def test_unknown_model(self):
        with pytest.raises(ArgumentError):
            ModelFactory().create_model('vae')

    def test_architecture_override_does_not_leak(self):
        factory = ModelFactory()
        model = factory.create_model('gan', {'generator': {'hidden': [3]}})
        assert model.get_architecture()['generator']['hidden'] == [3]
        assert factory.get_model_config('gan')['architecture']['generator']['hidden'] == [256, 256]
