import struct

import numpy as np
import pytest

from ..errors import (ArgumentError, EvaluationError, WeightsFormatError, WeightsMagicError, WeightsTruncatedError,
                      WeightsVersionError)
from . import autodiff as ad
from .adam import adam_init, adam_step
from .gradcheck import check_gradients, max_relative_error, numerical_grad
from .mlp import (Activation, MlpNetwork, NetworkKind, forward_graph, init_mlp, mlp_forward,
                  parameter_count)
from .rng import RngState, derive_seed, sample_gaussian
from .weights_io import deserialize_weights, load_weights, save_weights, serialize_weights

ACTIVATIONS = ["relu", "leaky_relu", "tanh", "sigmoid", "identity"]


class TestRng:
    def test_same_seed_same_stream(self):
        a = sample_gaussian(RngState(7), (5, 3))
        b = sample_gaussian(RngState(7), (5, 3))
        assert np.array_equal(a, b)

    def test_children_are_independent_of_parent_consumption(self):
        parent = RngState(3)
        first = parent.child(4).uniform(6)
        parent.uniform(100)
        assert np.array_equal(first, parent.child(4).uniform(6))
        assert derive_seed(3, 4) == parent.child(4).seed
        assert derive_seed(3, 4) != derive_seed(3, 5)

    def test_gaussian_moments(self):
        x = sample_gaussian(RngState(1), 200000, 2.0, 3.0)
        assert abs(x.mean() - 2.0) < 0.03
        assert abs(x.std() - 3.0) < 0.03

    def test_odd_and_empty_shapes(self):
        assert sample_gaussian(RngState(0), 7).shape == (7,)
        assert sample_gaussian(RngState(0), (0, 4)).shape == (0, 4)

    def test_permutation(self):
        p = RngState(9).permutation(50)
        assert sorted(p.tolist()) == list(range(50))


class TestAutodiff:
    def test_matmul_gradient(self):
        rng = RngState(0)
        a, b = sample_gaussian(rng, (3, 4)), sample_gaussian(rng, (4, 2))
        ga, gb = ad.grad(lambda x, y: ad.sum(ad.matmul(x, y)), a, b)
        assert np.allclose(ga, np.ones((3, 2)) @ b.T)
        assert np.allclose(gb, a.T @ np.ones((3, 2)))

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            ad.matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_unused_leaf_gets_zero_gradient(self):
        ga, gb = ad.grad(lambda x, y: ad.sum(ad.square(x)), np.ones(3), np.ones(2))
        assert np.array_equal(ga, 2 * np.ones(3))
        assert np.array_equal(gb, np.zeros(2))

    def test_shared_subexpression_accumulates(self):
        (g,) = ad.grad(lambda x: ad.sum(ad.mul(x, x)), np.array([1.0, -2.0]))
        assert np.allclose(g, [2.0, -4.0])

    def test_log_of_non_positive_names_node(self):
        with pytest.raises(EvaluationError) as info:
            ad.log(ad.variable(np.array([1.0, 0.0]), name="d_out"))
        assert info.value.node == "d_out"

    def test_sqrt_gradient_at_zero(self):
        (g,) = ad.grad(lambda x: ad.sum(ad.sqrt(x)), np.array([0.0, 4.0]))
        assert g[0] == 0.0
        assert g[1] == pytest.approx(0.25)

    def test_backward_needs_scalar(self):
        x = ad.variable(np.ones(3))
        with pytest.raises(ArgumentError):
            ad.backward(ad.square(x), [x])

    @pytest.mark.parametrize("op", [ad.relu, ad.tanh, ad.sigmoid, ad.identity, ad.square,
                                    lambda v: ad.leaky_relu(v, 0.2)])
    def test_elementwise_gradients(self, op):
        x = sample_gaussian(RngState(5), (4, 3)) + 0.05
        assert check_gradients(lambda v: ad.sum(op(v)), x)

    def test_reductions_and_concat(self):
        rng = RngState(6)
        a, b = sample_gaussian(rng, (3, 2)), sample_gaussian(rng, (3, 4))

        def f(x, y):
            joined = ad.concat([x, y], axis=1)
            return ad.add(ad.mean(ad.square(ad.sum(joined, axis=1))), ad.mean(ad.log(ad.add(ad.square(y), 1.0))))

        assert max_relative_error(f, a, b) < 1e-6

    def test_broadcast_add_unbroadcasts(self):
        (gx, gb) = ad.grad(lambda x, b: ad.sum(ad.add(x, b)), np.ones((4, 3)), np.zeros(3))
        assert gb.shape == (3,)
        assert np.array_equal(gb, 4 * np.ones(3))


class TestMlp:
    def test_weight_shapes_and_parameter_count(self):
        net = init_mlp([4, 8, 3], ["relu", "tanh"], RngState(0), condition_dim=2)
        assert net.weights[0].shape == (8, 6)
        assert net.weights[1].shape == (3, 8)
        assert net.parameter_count == parameter_count([4, 8, 3], 2) == 8 * 6 + 8 + 3 * 8 + 3

    def test_zero_weights_identity_output_gives_bias(self):
        net = MlpNetwork((3, 2), (Activation("identity"),), (np.zeros((2, 3)),), (np.array([1.5, -2.0]),))
        assert np.array_equal(mlp_forward(net, np.array([7.0, 8.0, 9.0])), [1.5, -2.0])

    def test_single_vector_in_single_vector_out(self):
        net = init_mlp([5, 4, 2], ["relu", "identity"], RngState(1))
        out = mlp_forward(net, np.ones(5))
        assert out.shape == (2,)
        assert np.allclose(out, mlp_forward(net, np.ones((1, 5)))[0])

    def test_condition_required_iff_conditional(self):
        net = init_mlp([3, 2], ["identity"], RngState(1), condition_dim=2)
        with pytest.raises(ArgumentError):
            mlp_forward(net, np.ones((1, 3)))
        plain = init_mlp([3, 2], ["identity"], RngState(1))
        with pytest.raises(ArgumentError):
            mlp_forward(plain, np.ones((1, 3)), np.ones((1, 2)))

    def test_condition_enters_first_layer_by_concatenation(self):
        rng = RngState(2)
        net = init_mlp([3, 4, 2], ["tanh", "identity"], rng, condition_dim=2)
        x, y = sample_gaussian(rng, (5, 3)), sample_gaussian(rng, (5, 2))
        h = np.tanh(np.concatenate([x, y], axis=1) @ net.weights[0].T + net.biases[0])
        assert np.allclose(mlp_forward(net, x, y), h @ net.weights[1].T + net.biases[1])

    def test_activation_parse(self):
        assert Activation.parse("leaky_relu(0.1)").slope == 0.1
        assert str(Activation.parse("leaky_relu")) == "leaky_relu"
        with pytest.raises(ArgumentError):
            Activation.parse("softplus")

    @pytest.mark.parametrize("activation", ACTIVATIONS)
    def test_parameter_gradients_every_activation(self, activation):
        rng = RngState(11)
        net = init_mlp([3, 5, 2], [activation, "tanh"], rng, condition_dim=1)
        x, y = sample_gaussian(rng, (4, 3)), sample_gaussian(rng, (4, 1))

        def loss(*params):
            return ad.sum(ad.square(forward_graph(net, x, y, list(params))))

        assert max_relative_error(loss, *net.params()) < 1e-5

    def test_dropout_is_deterministic_given_stream(self):
        net = init_mlp([3, 6, 1], ["relu", "sigmoid"], RngState(0))
        x = np.ones((2, 3))
        a = forward_graph(net, x, None, None, 0.5, RngState(4)).value
        b = forward_graph(net, x, None, None, 0.5, RngState(4)).value
        assert np.array_equal(a, b)
        with pytest.raises(ArgumentError):
            forward_graph(net, x, None, None, 0.5, None)

    def test_with_params_is_a_new_value(self):
        net = init_mlp([2, 2], ["identity"], RngState(0))
        changed = net.with_params([p + 1.0 for p in net.params()])
        assert changed.checksum() != net.checksum()
        assert net.checksum() == init_mlp([2, 2], ["identity"], RngState(0)).checksum()


class TestAdam:
    def test_first_step_moves_by_lr_against_gradient_sign(self):
        state = adam_init([np.zeros(3)], lr=0.1, beta1=0.5, beta2=0.999)
        (p,), state = adam_step([np.zeros(3)], [np.array([2.0, -3.0, 0.5])], state)
        assert np.allclose(p, [-0.1, 0.1, -0.1], atol=1e-7)
        assert state.t == 1

    def test_inputs_are_not_mutated(self):
        params = [np.ones(2)]
        state = adam_init(params)
        adam_step(params, [np.ones(2)], state)
        assert np.array_equal(params[0], np.ones(2))
        assert state.t == 0 and np.array_equal(state.m[0], np.zeros(2))

    def test_minimises_quadratic(self):
        p = [np.array([3.0, -4.0])]
        state = adam_init(p, lr=0.1, beta1=0.9)
        for _ in range(500):
            p, state = adam_step(p, [2.0 * p[0]], state)
        assert np.linalg.norm(p[0]) < 5e-2

    def test_shape_mismatch(self):
        state = adam_init([np.zeros(2)])
        with pytest.raises(ArgumentError):
            adam_step([np.zeros(2)], [np.zeros(3)], state)


class TestWeightsFormat:
    def _net(self):
        return init_mlp([4, 6, 3], ["leaky_relu", "sigmoid"], RngState(3), condition_dim=2,
                        kind=NetworkKind.DISCRIMINATOR)

    def test_round_trip_is_exact(self):
        net = self._net()
        blob = serialize_weights(net)
        again = deserialize_weights(blob)
        assert again.checksum() == net.checksum()
        assert again.describe() == net.describe()
        assert serialize_weights(again) == blob

    def test_file_helpers(self, tmp_path):
        net = self._net()
        path = save_weights(tmp_path / "d.gpcs", net)
        assert load_weights(path).checksum() == net.checksum()

    def test_bad_magic(self):
        blob = bytearray(serialize_weights(self._net()))
        blob[:4] = b"XXXX"
        with pytest.raises(WeightsMagicError):
            deserialize_weights(bytes(blob))

    def test_bad_version(self):
        blob = bytearray(serialize_weights(self._net()))
        blob[4] = 9
        with pytest.raises(WeightsVersionError):
            deserialize_weights(bytes(blob))

    def test_truncated_payload_reports_offset(self):
        blob = serialize_weights(self._net())
        with pytest.raises(WeightsTruncatedError) as info:
            deserialize_weights(blob[:-5])
        assert info.value.offset > 0

    def test_non_default_leaky_slope_is_refused(self):
        net = init_mlp([2, 2], [Activation("leaky_relu", 0.1)], RngState(0))
        with pytest.raises(ArgumentError):
            serialize_weights(net)


    @pytest.mark.parametrize("layer, width", [(0, 0), (1, 0), (2, 2 ** 24 + 1), (1, 0xFFFFFFFF)])
    def test_declared_widths_are_bounded(self, layer, width):
        blob = bytearray(serialize_weights(self._net()))
        struct.pack_into("<I", blob, 20 + 4 * layer, width)
        with pytest.raises(WeightsFormatError) as info:
            deserialize_weights(bytes(blob))
        assert info.value.exit_code == 2

    def test_condition_width_is_bounded(self):
        blob = bytearray(serialize_weights(self._net()))
        struct.pack_into("<I", blob, 12, 2 ** 30)
        with pytest.raises(WeightsFormatError):
            deserialize_weights(bytes(blob))

    def test_large_declared_payload_is_truncation(self):
        blob = bytearray(serialize_weights(self._net()))
        struct.pack_into("<I", blob, 24, 2 ** 24)
        with pytest.raises(WeightsTruncatedError):
            deserialize_weights(bytes(blob))


def test_numerical_grad_matches_closed_form():
    (g,) = numerical_grad(lambda x: ad.sum(ad.square(x)), np.array([1.0, 2.0]))
    assert np.allclose(g, [2.0, 4.0], atol=1e-8)
