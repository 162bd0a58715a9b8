import numpy as np
import pytest

from ..data.synthetic import make_synthetic_manifold
from ..errors import ArgumentError
from ..metrics.certification import check_npgd_bound, estimate_rec, range_pairs, speedup_ratio
from ..neural.mlp import NetworkKind, init_mlp, mlp_forward
from ..neural.rng import RngState, sample_gaussian
from ..sensing.operator import apply_operator, make_measurement_operator
from .batch_runner import mean_wall_ms_per_image, reconstruct_batch
from .npgd_solver import NpgdSolver, learned_projection, npgd_reconstruct
from .pgd_solver import (PgdSolver, SolverConfig, gradient_step, measurement_loss, pgd_reconstruct,
                         project_inner)


def well_conditioned_setup(seed: int = 0, n: int = 20, k: int = 4):
    """
    Linear manifold with A = diag(s) W^T, s in [1, 1.3]: on range differences
    ||A d||^2 / ||d||^2 lies in [1, 1.69].
    """
    manifold = make_synthetic_manifold(n, k, RngState(seed), offset_scale=0.5)
    s = 1.0 + 0.3 * RngState(seed).child(1).uniform(k)
    s[0], s[-1] = 1.0, 1.3
    A = np.diag(s) @ manifold.W.T
    x_true = manifold.sample(1, RngState(seed).child(2))[0]
    return manifold, A, x_true


class TestGradientStep:
    def test_matches_closed_form(self):
        A = make_measurement_operator(5, 12, RngState(0))
        x, y = sample_gaussian(RngState(1), 12), sample_gaussian(RngState(2), 5)
        expected = x + 0.3 * A.matrix.T @ (y - A.matrix @ x)
        assert np.allclose(gradient_step(x, A, y, 0.3), expected)

    def test_shape_mismatch(self):
        A = make_measurement_operator(5, 12, RngState(0))
        with pytest.raises(ArgumentError):
            gradient_step(np.zeros(12), A, np.zeros(4), 0.5)

    def test_measurement_loss(self):
        assert measurement_loss(np.eye(2), np.array([1.0, 2.0]), np.array([0.0, 0.0])) == 5.0


    def test_superposition(self):
        A = make_measurement_operator(6, 14, RngState(3))
        x1, x2 = sample_gaussian(RngState(4), 14), sample_gaussian(RngState(5), 14)
        y1, y2 = sample_gaussian(RngState(6), 6), sample_gaussian(RngState(7), 6)
        a, b = 0.7, -1.9
        combined = gradient_step(a * x1 + b * x2, A, a * y1 + b * y2, 0.4)
        expected = a * gradient_step(x1, A, y1, 0.4) + b * gradient_step(x2, A, y2, 0.4)
        assert np.allclose(combined, expected, rtol=0, atol=1e-12)


class TestSolverConfig:
    def test_auto_step_needs_estimate(self):
        with pytest.raises(ArgumentError):
            SolverConfig(step="auto").step_size()
        assert SolverConfig(step="auto", beta_hat=4.0).step_size() == 0.25

    @pytest.mark.parametrize("values", [{'outer_iters': 0}, {'step': -1.0}, {'init_policy': 'random'},
                                        {'inner_lr': 0.0}, {'inner_optimizer': 'lbfgs'}])
    def test_invalid(self, values):
        with pytest.raises(ArgumentError):
            SolverConfig(**values)

    def test_from_dict_ignores_unknown_keys(self):
        cfg = SolverConfig.from_dict({'outer_iters': 3, 'window': 7})
        assert cfg.outer_iters == 3


class TestLinearOracle:
    def test_pgd_with_exact_projector_equals_npgd_with_exact_inverse(self):
        manifold = make_synthetic_manifold(30, 5, RngState(0))
        A = make_measurement_operator(12, 30, RngState(1))
        x_true = manifold.sample(1, RngState(2))[0]
        y = apply_operator(A, x_true)
        cfg = SolverConfig(outer_iters=25, step=0.5)

        pgd = pgd_reconstruct(manifold.generator_network(), A, y, cfg, x_true=x_true,
                              projector=manifold.exact_project)
        npgd = npgd_reconstruct(manifold.generator_network(), manifold.pinv_network(), A, y, cfg, x_true)
        assert len(pgd) == len(npgd) == 26
        assert np.max(np.abs(pgd.x_hat - npgd.x_hat)) < 1e-10
        assert np.allclose(pgd.f_xn, npgd.f_xn, rtol=0, atol=1e-10)
        assert np.allclose(npgd.z_hat, manifold.exact_pinv(npgd.x_hat), atol=1e-10)

    def test_noiseless_recovery_in_thirty_iterations(self):
        manifold, A, x_true = well_conditioned_setup()
        y = A @ x_true
        trace = npgd_reconstruct(manifold.generator_network(), manifold.pinv_network(), A, y,
                                 SolverConfig(outer_iters=30, step=1.0 / 1.69), x_true)
        assert trace.mse[-1] < 1e-6
        assert trace.mse[0] == pytest.approx(float(x_true @ x_true))

    def test_bound_holds_along_the_iterates(self):
        manifold, A, x_true = well_conditioned_setup(seed=3)
        G = manifold.generator_network()
        rec = estimate_rec(A, range_pairs(G, 500, RngState(4)))
        assert 1.0 - 1e-9 <= rec.alpha and rec.beta <= 1.69 + 1e-9
        cfg = SolverConfig(outer_iters=20, step=1.0 / rec.beta)
        trace = npgd_reconstruct(G, manifold.pinv_network(), A, A @ x_true, cfg, x_true)
        result = check_npgd_bound(trace, rec, delta=0.0)
        assert result['holds'], result['violations']
        assert all(b >= a for a, b in zip(result['bounds'][1:], result['bounds'][:-1]))

    def test_iterates_are_kept_on_request(self):
        manifold, A, x_true = well_conditioned_setup()
        trace = npgd_reconstruct(manifold.generator_network(), manifold.pinv_network(), A, A @ x_true,
                                 SolverConfig(outer_iters=4), keep_iterates=True)
        assert len(trace.iterates) == 5
        assert np.isnan(trace.mse).all()


class TestInnerProjection:
    def setup_method(self):
        self.manifold = make_synthetic_manifold(16, 3, RngState(7), offset_scale=0.5)
        self.G = self.manifold.generator_network()
        self.cfg = SolverConfig(inner_iters=100, inner_lr=0.25)

    def test_inner_descent_reaches_exact_projection(self):
        w = sample_gaussian(RngState(8), 16)
        x, z = project_inner(self.G, w, None, self.cfg, RngState(9))
        assert np.allclose(x, self.manifold.exact_project(w), atol=1e-8)
        assert np.allclose(z, self.manifold.exact_pinv(w), atol=1e-8)

    def test_adam_inner_optimiser_and_restarts(self):
        cfg = SolverConfig(inner_iters=1000, inner_lr=0.05, inner_optimizer="adam", restarts=2)
        w = sample_gaussian(RngState(8), 16)
        x, _ = project_inner(self.G, w, None, cfg, RngState(9))
        assert np.allclose(x, self.manifold.exact_project(w), atol=1e-2)

    def test_pgd_tracks_exact_projector(self):
        A = make_measurement_operator(8, 16, RngState(10))
        x_true = self.manifold.sample(1, RngState(11))[0]
        y = apply_operator(A, x_true)
        cfg = SolverConfig(outer_iters=10, step=0.5, inner_iters=100, inner_lr=0.25)
        inner = pgd_reconstruct(self.G, A, y, cfg, RngState(12), x_true)
        exact = pgd_reconstruct(self.G, A, y, cfg, x_true=x_true, projector=self.manifold.exact_project)
        assert np.allclose(inner.x_hat, exact.x_hat, atol=1e-6)
        assert inner.total_wall_ms > 0

    def test_conditional_generator_needs_measurement(self):
        G = init_mlp([3, 16], ["tanh"], RngState(0), condition_dim=4)
        with pytest.raises(ArgumentError):
            project_inner(G, np.zeros(16), None, self.cfg, RngState(1))


class TestDefaultInnerProjection:
    """
    On an orthonormal linear generator one GD step maps z to
    z - 2 lr (z - z*), so the iterate after T steps is known in closed form.
    """

    def setup_method(self):
        self.manifold = make_synthetic_manifold(64, 8, RngState(20))
        self.G = self.manifold.generator_network()

    def test_defaults_contract_by_known_factor(self):
        cfg = SolverConfig()
        assert (cfg.inner_optimizer, cfg.inner_iters, cfg.inner_lr) == ("gd", 100, 0.01)
        w = sample_gaussian(RngState(21), 64)
        z0 = sample_gaussian(RngState(22), 8)
        _, z = project_inner(self.G, w, None, cfg, z_init=z0)
        z_star = self.manifold.exact_pinv(w)
        contraction = (1.0 - 2.0 * cfg.inner_lr) ** cfg.inner_iters
        assert np.allclose(z, z_star + contraction * (z0 - z_star), rtol=0, atol=1e-9)

    def test_larger_rate_matches_exact_projection_on_random_inputs(self):
        cfg = SolverConfig(inner_iters=100, inner_lr=0.05)
        inputs = sample_gaussian(RngState(23), (200, 64))
        rng = RngState(24)
        close = 0
        for i, w in enumerate(inputs):
            x, _ = project_inner(self.G, w, None, cfg, rng.child(i))
            d = x - self.manifold.exact_project(w)
            close += float(d @ d) <= 1e-4
        assert close >= 190

    def test_exact_projection_beats_random_latents(self):
        w = sample_gaussian(RngState(25), 64)
        best = np.sum((w - self.manifold.exact_project(w)) ** 2)
        candidates = self.manifold.generate(sample_gaussian(RngState(26), (1000, 8)))
        assert np.all(np.sum((candidates - w) ** 2, axis=1) >= best - 1e-12)

    def test_solvers_return_generator_output_at_final_latent(self):
        A = make_measurement_operator(24, 64, RngState(27))
        x_true = self.manifold.sample(1, RngState(28))[0]
        y = apply_operator(A, x_true)
        cfg = SolverConfig(outer_iters=3, inner_iters=20, inner_lr=0.1)
        pgd = pgd_reconstruct(self.G, A, y, cfg, RngState(29))
        npgd = npgd_reconstruct(self.G, self.manifold.pinv_network(), A, y, cfg)
        for trace in (pgd, npgd):
            assert np.allclose(trace.x_hat, mlp_forward(self.G, trace.z_hat[None, :])[0], rtol=0, atol=1e-12)


class TestSolvers:
    def test_trace_csv_columns(self, tmp_path):
        manifold, A, x_true = well_conditioned_setup()
        trace = NpgdSolver(manifold.generator_network(), manifold.pinv_network(), A,
                           SolverConfig(outer_iters=3)).solve(A @ x_true, x_true)
        path = trace.to_csv(tmp_path / "trace.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "iter,f_xn,mse,wall_ms"
        assert len(lines) == 5

    def test_invalid_measurement_shape(self):
        manifold, A, _ = well_conditioned_setup()
        solver = PgdSolver(manifold.generator_network(), A)
        assert not solver.validate_input(np.zeros(3))['valid']
        with pytest.raises(ArgumentError):
            solver.solve(np.zeros(3))

    def test_learned_projection_checks_widths(self):
        manifold = make_synthetic_manifold(10, 2, RngState(0))
        other = make_synthetic_manifold(10, 3, RngState(1))
        with pytest.raises(ArgumentError):
            learned_projection(manifold.generator_network(), other.pinv_network(), np.zeros(10))


class TestBatchRunner:
    def _setup(self):
        manifold = make_synthetic_manifold(16, 3, RngState(0))
        A = make_measurement_operator(8, 16, RngState(1))
        X = manifold.sample(4, RngState(2))
        solver = PgdSolver(manifold.generator_network(), A, SolverConfig(outer_iters=3, inner_iters=20,
                                                                         inner_lr=0.2))
        return solver, apply_operator(A, X), X

    def test_results_do_not_depend_on_worker_count(self):
        solver, Y, X = self._setup()
        serial = reconstruct_batch(solver, Y, X, seed=5, jobs=1)
        parallel = reconstruct_batch(solver, Y, X, seed=5, jobs=2)
        for a, b in zip(serial, parallel):
            assert np.array_equal(a.x_hat, b.x_hat)
            assert a.mse == b.mse

    def test_images_use_their_own_streams(self):
        solver, Y, X = self._setup()
        whole = reconstruct_batch(solver, Y, X, seed=5)
        single = solver.solve(Y[2], X[2], RngState(5).child(2))
        assert np.array_equal(whole[2].x_hat, single.x_hat)

    def test_mismatched_ground_truth(self):
        solver, Y, X = self._setup()
        with pytest.raises(ArgumentError):
            reconstruct_batch(solver, Y, X[:2])

    def test_mean_wall_time(self):
        solver, Y, X = self._setup()
        traces = reconstruct_batch(solver, Y[:2], X[:2])
        assert mean_wall_ms_per_image(traces) == pytest.approx(np.mean([t.total_wall_ms for t in traces]))
        with pytest.raises(ArgumentError):
            mean_wall_ms_per_image([])


class TestSpeedup:
    def test_learned_projection_is_at_least_thirty_times_faster(self):
        rng = RngState(50)
        G = init_mlp([64, 256, 256, 784], ["relu", "relu", "tanh"], rng.child(1))
        pinv = init_mlp([784, 256, 256, 64], ["relu", "relu", "identity"], rng.child(2), kind=NetworkKind.PINV)
        A = make_measurement_operator(39, 784, rng.child(3))
        X = mlp_forward(G, sample_gaussian(rng.child(4), (6, 64)))
        Y = apply_operator(A, X)
        cfg = SolverConfig(outer_iters=3, inner_iters=100)
        pgd = reconstruct_batch(PgdSolver(G, A, cfg), Y, X, seed=5)
        npgd = reconstruct_batch(NpgdSolver(G, pinv, A, cfg), Y, X, seed=5)
        assert speedup_ratio(mean_wall_ms_per_image(pgd), mean_wall_ms_per_image(npgd)) >= 30
