import math

import numpy as np
import pytest

from ..data.synthetic import make_synthetic_manifold
from ..errors import ArgumentError, EstimationError
from ..neural.rng import RngState, sample_gaussian
from ..sensing.noise import noise_for_snr
from ..sensing.operator import make_measurement_operator
from ..solver.pgd_solver import SolverConfig, SolverTrace
from .certification import (RecEstimate, all_pairs, check_npgd_bound, dataset_pairs, estimate_projector_delta,
                            estimate_rec, estimate_s_rec, npgd_error_bound, range_pairs, speedup_ratio)
from .reconstruction import mse, mse_per_pixel, residual_error, snr_db
from .ssim import SsimConfig, mssim, mssim_batch, ssim, ssim_map


def brute_force_mssim(x, x_star, window=7, L=2.0, k1=0.01, k2=0.03):
    a = (np.asarray(x, dtype=np.float64).reshape(28, 28) + 1.0) * L / 2.0
    b = (np.asarray(x_star, dtype=np.float64).reshape(28, 28) + 1.0) * L / 2.0
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    values = []
    for i in range(28 - window + 1):
        for j in range(28 - window + 1):
            pa = a[i:i + window, j:j + window].ravel()
            pb = b[i:i + window, j:j + window].ravel()
            count = len(pa)
            mu_a, mu_b = sum(pa) / count, sum(pb) / count
            var_a = sum((p - mu_a) ** 2 for p in pa) / count
            var_b = sum((p - mu_b) ** 2 for p in pb) / count
            cov = sum((p - mu_a) * (q - mu_b) for p, q in zip(pa, pb)) / count
            values.append((2 * mu_a * mu_b + c1) * (2 * cov + c2)
                          / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return sum(values) / len(values)


def random_images(seed, count=1, n=784):
    return np.tanh(sample_gaussian(RngState(seed), (count, n)))


class TestSsim:
    @pytest.mark.parametrize("pair", range(50))
    def test_matches_window_loop(self, pair):
        x = random_images(2 * pair)[0]
        x_star = np.clip(x + 0.3 * random_images(2 * pair + 1)[0], -1.0, 1.0)
        assert mssim(x, x_star) == pytest.approx(brute_force_mssim(x, x_star), abs=1e-9)

    def test_identical_images_score_one(self):
        x = random_images(0)[0]
        assert mssim(x, x) == pytest.approx(1.0, abs=1e-12)
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_unsquared_means_denominator_differs(self):
        x = random_images(0)[0]
        assert mssim(x, x, SsimConfig(unsquared_means=True)) != pytest.approx(1.0)

    def test_unsquared_means_against_hand_computation(self):
        x = random_images(11, 1, 64)[0]
        x_star = random_images(12, 1, 64)[0]
        cfg = SsimConfig(window=4, unsquared_means=True)
        a = [(v + 1.0) for v in x]
        b = [(v + 1.0) for v in x_star]
        c1, c2 = (0.01 * 2.0) ** 2, (0.03 * 2.0) ** 2
        values = []
        for i in range(5):
            for j in range(5):
                pa = [a[(i + r) * 8 + j + c] for r in range(4) for c in range(4)]
                pb = [b[(i + r) * 8 + j + c] for r in range(4) for c in range(4)]
                mu_a, mu_b = sum(pa) / 16, sum(pb) / 16
                sd_a = math.sqrt(sum((p - mu_a) ** 2 for p in pa) / 16)
                sd_b = math.sqrt(sum((p - mu_b) ** 2 for p in pb) / 16)
                cov = sum((p - mu_a) * (q - mu_b) for p, q in zip(pa, pb)) / 16
                values.append((2 * mu_a * mu_b + c1) * (2 * cov + c2) / ((mu_a + mu_b + c1) * (sd_a + sd_b + c2)))
        assert mssim(x, x_star, cfg) == pytest.approx(sum(values) / len(values), abs=1e-12)

    def test_symmetric_in_its_arguments(self):
        for seed in range(10):
            x, y = random_images(2 * seed)[0], random_images(2 * seed + 1)[0]
            assert mssim(x, y) == pytest.approx(mssim(y, x), abs=1e-12)

    def test_map_shape_and_stride(self):
        x, y = random_images(1)[0], random_images(2)[0]
        assert ssim_map(x, y).shape == (22, 22)
        assert ssim_map(x, y, SsimConfig(window=7, stride=3)).shape == (8, 8)

    def test_batch_mean(self):
        X, Y = random_images(3, 3), random_images(4, 3)
        expected = np.mean([mssim(a, b) for a, b in zip(X, Y)])
        assert mssim_batch(X, Y, (28, 28)) == pytest.approx(expected)

    def test_window_larger_than_image(self):
        with pytest.raises(ArgumentError):
            mssim(np.zeros(16), np.zeros(16), SsimConfig(window=5))

    def test_non_square_needs_shape(self):
        with pytest.raises(ArgumentError):
            mssim(np.zeros(20), np.zeros(20))
        assert mssim(np.zeros(20), np.zeros(20), shape=(4, 5), cfg=SsimConfig(window=3)) == pytest.approx(1.0)


class TestReconstructionErrors:
    def test_mse_against_loop(self):
        X, Y = random_images(0, 5, 30), random_images(1, 5, 30)
        expected = sum(sum((a - b) ** 2 for a, b in zip(x, y)) for x, y in zip(X, Y)) / 5
        assert mse(X, Y) == pytest.approx(expected, rel=1e-12)
        assert mse_per_pixel(X, Y) == pytest.approx(expected / 30, rel=1e-12)

    def test_single_image_is_a_batch_of_one(self):
        assert mse(np.array([1.0, 2.0]), np.zeros(2)) == 5.0

    def test_residual_against_loop(self):
        A = make_measurement_operator(4, 30, RngState(0))
        X, Y = random_images(2, 3, 30), sample_gaussian(RngState(3), (3, 4))
        expected = 0.0
        for x, y in zip(X, Y):
            r = [sum(A.matrix[i, j] * x[j] for j in range(30)) - y[i] for i in range(4)]
            expected += sum(v * v for v in r)
        assert residual_error(A, X, Y) == pytest.approx(expected / 3, rel=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            mse(np.zeros((2, 3)), np.zeros((3, 3)))

    def test_invariant_under_joint_coordinate_permutation(self):
        X, Y = random_images(4, 3, 30), random_images(5, 3, 30)
        A = make_measurement_operator(6, 30, RngState(6))
        M = sample_gaussian(RngState(7), (3, 6))
        cols, rows = RngState(8).permutation(30), RngState(9).permutation(6)
        assert mse(X[:, cols], Y[:, cols]) == pytest.approx(mse(X, Y), rel=1e-12)
        shuffled = A.matrix[rows][:, cols]
        expected = residual_error(A, X, M)
        assert residual_error(shuffled, X[:, cols], M[:, rows]) == pytest.approx(expected, rel=1e-12)

    def test_snr_round_trip(self):
        A = make_measurement_operator(15, 64, RngState(0))
        x = random_images(5, 1, 64)[0]
        eta = noise_for_snr(A, x, 7.5, RngState(1))
        assert snr_db(A, x, eta) == pytest.approx(7.5, abs=1e-9)
        assert snr_db(A, x, np.zeros(15)) == math.inf


class TestRestrictedEigenvalues:
    def test_rec_is_min_and_max_ratio(self):
        A = make_measurement_operator(6, 12, RngState(0))
        points = list(sample_gaussian(RngState(1), (5, 12)))
        ratios = []
        for p, q in all_pairs(points):
            d = p - q
            ratios.append(float(np.sum((A.matrix @ d) ** 2) / (d @ d)))
        rec = estimate_rec(A, all_pairs(points), seed=1)
        assert rec.pairs == 10
        assert rec.alpha == pytest.approx(min(ratios)) and rec.beta == pytest.approx(max(ratios))
        assert rec.rho == pytest.approx(math.sqrt(rec.beta))
        assert rec.to_dict()['seed'] == 1

    def test_identical_pairs_are_skipped(self):
        x = np.ones(4)
        with pytest.raises(EstimationError):
            estimate_rec(np.eye(4), [(x, x), (x, x)])
        rec = estimate_rec(np.eye(4), [(x, x), (x, np.zeros(4))])
        assert rec.skipped == 1 and rec.pairs == 1

    def test_isometry_on_the_range(self):
        manifold = make_synthetic_manifold(10, 3, RngState(0))
        A = manifold.W.T
        rec = estimate_rec(A, range_pairs(manifold.generator_network(), 50, RngState(1)))
        assert rec.alpha == pytest.approx(1.0) and rec.beta == pytest.approx(1.0)

    def test_count_limits_the_sample(self):
        manifold = make_synthetic_manifold(10, 3, RngState(0))
        rec = estimate_rec(np.eye(10), range_pairs(manifold.generator_network(), 100, RngState(1)), count=7)
        assert rec.pairs == 7
        with pytest.raises(ArgumentError):
            estimate_rec(np.eye(10), range_pairs(manifold.generator_network(), 100, RngState(1)), count=1)

    def test_s_rec_over_dataset_pairs(self):
        images = sample_gaussian(RngState(2), (20, 12))
        A = make_measurement_operator(6, 12, RngState(3))
        s_rec = estimate_s_rec(A, dataset_pairs(images, 40, RngState(4)))
        rec = estimate_rec(A, dataset_pairs(images, 40, RngState(4)))
        assert s_rec.pairs == 40
        assert s_rec.gamma == pytest.approx(rec.alpha)

    def test_dataset_pairs_need_two_images(self):
        with pytest.raises(ArgumentError):
            list(dataset_pairs(np.zeros((1, 4)), 3, RngState(0)))


class TestProjectorDelta:
    def setup_method(self):
        self.manifold = make_synthetic_manifold(12, 3, RngState(0))
        self.samples = list(sample_gaussian(RngState(1), (6, 12)))

    def test_exact_inverse_has_zero_delta(self):
        G, P = self.manifold.generator_network(), self.manifold.pinv_network()
        estimate = estimate_projector_delta(G, P, self.samples, exact_projector=self.manifold.exact_project)
        assert estimate.delta == pytest.approx(0.0, abs=1e-12)
        assert estimate.samples == 6 and estimate.excluded == 0

    def test_inner_descent_agrees_with_closed_form(self):
        G, P = self.manifold.generator_network(), self.manifold.pinv_network()
        cfg = SolverConfig(inner_iters=200, inner_lr=0.25)
        estimate = estimate_projector_delta(G, P, self.samples, cfg, count=4)
        assert estimate.samples == 4
        assert estimate.delta == pytest.approx(0.0, abs=1e-9)

    def test_perturbed_inverse_has_positive_delta(self):
        G, P = self.manifold.generator_network(), self.manifold.pinv_network()
        shifted = P.with_params([P.weights[0], P.biases[0] + 0.5])
        estimate = estimate_projector_delta(G, shifted, self.samples, exact_projector=self.manifold.exact_project)
        assert estimate.delta == pytest.approx(3 * 0.25, rel=1e-9)

    def test_unconverged_samples_are_excluded(self):
        G, P = self.manifold.generator_network(), self.manifold.pinv_network()
        shifted = P.with_params([P.weights[0], P.biases[0] + 0.5])
        cfg = SolverConfig(inner_iters=2, inner_lr=1e-3)
        with pytest.raises(EstimationError):
            estimate_projector_delta(G, shifted, self.samples, cfg, tolerance=1e-12)


class TestBounds:
    def test_bound_values(self):
        assert npgd_error_bound(4.0, 1.0, 1.5, 0.0, 0) == 4.0
        assert npgd_error_bound(4.0, 1.0, 1.5, 0.0, 2) == pytest.approx(1.0)
        assert npgd_error_bound(4.0, 1.0, 1.5, 0.2, 50) == pytest.approx(0.6, abs=1e-9)

    def test_bound_requires_ratio_below_two(self):
        with pytest.raises(ArgumentError):
            npgd_error_bound(1.0, 1.0, 2.0, 0.0, 1)
        with pytest.raises(ArgumentError):
            npgd_error_bound(1.0, 0.0, 1.0, 0.0, 1)

    def test_trace_check_reports_violations(self):
        trace = SolverTrace(f_xn=[4.0, 2.5, 0.5])
        result = check_npgd_bound(trace, RecEstimate(1.0, 1.5, 10), 0.0)
        assert not result['holds'] and result['violations'] == [1]

    def test_speedup(self):
        assert speedup_ratio(1500.0, 10.0) == pytest.approx(150.0)
        assert speedup_ratio([100.0, 300.0], [1.0, 3.0]) == pytest.approx(100.0)
        assert speedup_ratio(5.0, 0.0) == math.inf
        with pytest.raises(ArgumentError):
            speedup_ratio(-1.0, 1.0)
