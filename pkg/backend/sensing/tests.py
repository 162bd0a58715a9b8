import math

import numpy as np
import pytest

from ..errors import ArgumentError, DegenerateSignalError
from ..neural.rng import RngState, sample_gaussian
from .noise import FIXED_SIGMA, NOISELESS, TARGET_SNR, NoiseSpec, draw_noise, measure, noise_for_snr
from .operator import MeasurementOperator, adjoint, apply_operator, make_measurement_operator


class TestOperator:
    def test_same_seed_same_matrix(self):
        a = make_measurement_operator(15, 784, RngState(42))
        b = make_measurement_operator(15, 784, RngState(42))
        assert np.array_equal(a.matrix, b.matrix)
        assert a.seed == RngState(42).seed

    def test_entry_variance_is_one_over_m(self):
        A = make_measurement_operator(200, 400, RngState(1))
        assert abs(A.matrix.var() - 1.0 / 200) < 0.05 / 200

    def test_square_operator_allowed(self):
        A = make_measurement_operator(784, 784, RngState(0))
        assert A.matrix.shape == (784, 784)

    @pytest.mark.parametrize("m,n", [(0, 10), (11, 10)])
    def test_invalid_dimensions(self, m, n):
        with pytest.raises(ArgumentError):
            make_measurement_operator(m, n, RngState(0))

    def test_orthogonalized_rows(self):
        A = make_measurement_operator(8, 32, RngState(3), orthogonalize=True)
        assert np.allclose(A.matrix @ A.matrix.T, (32 / 8) * np.eye(8), atol=1e-10)

    def test_description_recreates_operator(self):
        A = make_measurement_operator(6, 20, RngState(5), orthogonalize=True)
        again = MeasurementOperator.from_description(A.describe())
        assert np.array_equal(A.matrix, again.matrix)

    def test_apply_and_adjoint_on_batches(self):
        A = make_measurement_operator(4, 9, RngState(2))
        X = sample_gaussian(RngState(3), (5, 9))
        V = sample_gaussian(RngState(4), (5, 4))
        assert np.allclose(apply_operator(A, X), X @ A.matrix.T)
        assert np.allclose(apply_operator(A, X[0]), A.matrix @ X[0])
        assert np.allclose(adjoint(A, V[0]), A.matrix.T @ V[0])
        assert np.allclose(adjoint(A, V), V @ A.matrix)


class TestNoise:
    def setup_method(self):
        self.A = make_measurement_operator(15, 64, RngState(0))
        self.x = sample_gaussian(RngState(1), 64)

    @pytest.mark.parametrize("snr", [-20.0, -5.0, 0.0, 10.0, 20.0])
    def test_realised_snr_is_exact(self, snr):
        eta = noise_for_snr(self.A, self.x, snr, RngState(2))
        ax = apply_operator(self.A, self.x)
        realised = 10 * math.log10((ax @ ax) / (eta @ eta))
        assert realised == pytest.approx(snr, abs=1e-9)

    def test_infinite_snr_is_zero_noise(self):
        assert np.array_equal(noise_for_snr(self.A, self.x, math.inf, RngState(0)), np.zeros(15))

    def test_zero_signal_is_degenerate(self):
        with pytest.raises(DegenerateSignalError):
            noise_for_snr(self.A, np.zeros(64), 10.0, RngState(0))

    def test_measure_noiseless_equals_ax(self):
        assert np.array_equal(measure(self.A, self.x), apply_operator(self.A, self.x))

    def test_measure_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            measure(self.A, self.x, np.zeros(14))

    def test_spec_parsing(self):
        assert NoiseSpec.parse("noiseless").mode == NOISELESS
        assert NoiseSpec.parse(None).mode == NOISELESS
        assert NoiseSpec.parse(math.inf).mode == NOISELESS
        assert NoiseSpec.parse("-4").snr_db == -4.0
        assert NoiseSpec.parse(6).mode == TARGET_SNR
        spec = NoiseSpec.parse("sigma:0.25")
        assert spec.mode == FIXED_SIGMA and spec.sigma == 0.25
        assert NoiseSpec.parse(-4).label == "-4"
        assert NoiseSpec().snr_value == math.inf

    def test_invalid_specs(self):
        with pytest.raises(ArgumentError):
            NoiseSpec("loud")
        with pytest.raises(ArgumentError):
            NoiseSpec(FIXED_SIGMA, sigma=-1.0)

    def test_draw_noise_batch_modes(self):
        X = sample_gaussian(RngState(7), (3, 64))
        assert np.array_equal(draw_noise(NoiseSpec(), self.A, X, RngState(0)), np.zeros((3, 15)))
        fixed = draw_noise(NoiseSpec(FIXED_SIGMA, sigma=0.5), self.A, X, RngState(0))
        assert fixed.shape == (3, 15)
        eta = draw_noise(NoiseSpec(TARGET_SNR, snr_db=3.0), self.A, X, RngState(0))
        AX = apply_operator(self.A, X)
        for row, noise in zip(AX, eta):
            assert 10 * math.log10((row @ row) / (noise @ noise)) == pytest.approx(3.0, abs=1e-9)

    def test_snr_noise_for_a_row_batch(self):
        X = sample_gaussian(RngState(8), (4, 64))
        eta = noise_for_snr(self.A, X, -3.0, RngState(9))
        assert eta.shape == (4, 15)
        for row, noise in zip(apply_operator(self.A, X), eta):
            assert 10 * math.log10((row @ row) / (noise @ noise)) == pytest.approx(-3.0, abs=1e-9)
        assert np.array_equal(eta, draw_noise(NoiseSpec(TARGET_SNR, snr_db=-3.0), self.A, X, RngState(9)))

    def test_snr_noise_rejects_higher_rank_input(self):
        with pytest.raises(ArgumentError):
            noise_for_snr(self.A, np.ones((2, 2, 64)), 10.0, RngState(0))


class TestLinearity:
    @pytest.mark.parametrize("seed", range(5))
    def test_measurement_is_linear(self, seed):
        A = make_measurement_operator(7, 20, RngState(seed))
        x1, x2 = sample_gaussian(RngState(seed).child(1), 20), sample_gaussian(RngState(seed).child(2), 20)
        a, b = sample_gaussian(RngState(seed).child(3), 2)
        assert np.allclose(apply_operator(A, a * x1 + b * x2),
                           a * apply_operator(A, x1) + b * apply_operator(A, x2), rtol=0, atol=1e-12)
        assert np.allclose(measure(A, a * x1 + b * x2), a * measure(A, x1) + b * measure(A, x2),
                           rtol=0, atol=1e-12)
