import gzip
import struct

import numpy as np
import pytest

from ..errors import (ArgumentError, DatasetStateError, IdxDimensionError, IdxLengthError, IdxMagicError,
                      IdxParseError, IdxTruncatedError)
from ..neural.mlp import mlp_forward
from ..neural.rng import RngState, sample_gaussian
from .idx import IMAGE_MAGIC, load_idx_file, parse_idx, write_idx
from .images import (NORMALIZED_RANGE, RAW_RANGE, ImageDataset, denormalize_images, denormalize_pixels,
                     iterate_batches, normalize_images)
from .mnist import load_images
from .synthetic import make_synthetic_manifold

FIXTURE_COUNT = 512


def mnist_like_fixture(count: int = FIXTURE_COUNT, seed: int = 0) -> np.ndarray:
    """Deterministic uint8 images shaped like MNIST (count x 28 x 28)."""
    rng = RngState(seed)
    return np.floor(rng.uniform((count, 28, 28)) * 256).astype(np.uint8)


@pytest.fixture
def fixture_bytes():
    return write_idx(mnist_like_fixture())


class TestIdx:
    def test_fixture_parses_with_exact_counts(self, fixture_bytes):
        dataset = parse_idx(fixture_bytes)
        assert dataset.count == FIXTURE_COUNT
        assert (dataset.rows, dataset.cols) == (28, 28)
        assert dataset.images.shape == (FIXTURE_COUNT, 784)
        assert dataset.pixel_range == RAW_RANGE
        assert np.array_equal(dataset.images.reshape(-1, 28, 28), mnist_like_fixture())

    def test_single_black_image_normalises_to_minus_one(self):
        data = struct.pack(">IIII", IMAGE_MAGIC, 1, 28, 28) + bytes(784)
        dataset = normalize_images(parse_idx(data))
        assert np.array_equal(dataset.images, -np.ones((1, 784)))

    def test_labels(self):
        labels = parse_idx(write_idx(np.arange(10, dtype=np.uint8)))
        assert labels.tolist() == list(range(10))

    # The five corrupted variants
    def test_bad_magic(self, fixture_bytes):
        with pytest.raises(IdxMagicError):
            parse_idx(b"\x00\x00\x08\x04" + fixture_bytes[4:])

    def test_truncated_header(self, fixture_bytes):
        with pytest.raises(IdxTruncatedError):
            parse_idx(fixture_bytes[:12])

    def test_truncated_payload(self, fixture_bytes):
        with pytest.raises(IdxTruncatedError):
            parse_idx(fixture_bytes[:-1])

    def test_trailing_bytes(self, fixture_bytes):
        with pytest.raises(IdxLengthError):
            parse_idx(fixture_bytes + b"\x00")

    def test_dimension_overflow(self):
        data = struct.pack(">IIII", IMAGE_MAGIC, 0xFFFFFFFF, 28, 28)
        with pytest.raises(IdxDimensionError):
            parse_idx(data)

    def test_all_parse_errors_share_a_base(self, fixture_bytes):
        for broken in (fixture_bytes[:3], fixture_bytes[:-7], b"\xff" * 16):
            with pytest.raises(IdxParseError):
                parse_idx(broken)

    def test_gzip_file(self, tmp_path, fixture_bytes):
        path = tmp_path / "train-images-idx3-ubyte.gz"
        path.write_bytes(gzip.compress(fixture_bytes))
        assert load_idx_file(path).count == FIXTURE_COUNT

    def test_writer_rejects_non_bytes(self):
        with pytest.raises(ArgumentError):
            write_idx(np.zeros((1, 2, 2)))


class TestImages:
    def test_normalise_and_back(self, fixture_bytes):
        raw = parse_idx(fixture_bytes)
        normalized = normalize_images(raw)
        assert normalized.pixel_range == NORMALIZED_RANGE
        assert normalized.range_ok()
        assert np.array_equal(denormalize_images(normalized).images, raw.images)

    def test_double_normalisation_refused(self, fixture_bytes):
        normalized = normalize_images(parse_idx(fixture_bytes))
        with pytest.raises(DatasetStateError):
            normalize_images(normalized)
        with pytest.raises(DatasetStateError):
            denormalize_images(parse_idx(fixture_bytes))

    def test_denormalize_pixels_endpoints(self):
        assert denormalize_pixels(np.array([-1.0, 0.0, 1.0, 3.0])).tolist() == [0, 128, 255, 255]

    def test_batches_keep_partial_tail(self):
        images = np.arange(10, dtype=np.float64)[:, None]
        batches = list(iterate_batches(images, 4, RngState(1)))
        assert [len(b) for b in batches] == [4, 4, 2]
        assert sorted(np.concatenate(batches)[:, 0].tolist()) == list(range(10))

    def test_batches_are_seeded(self):
        images = np.arange(20, dtype=np.float64)[:, None]
        first = [b.tolist() for b in iterate_batches(images, 5, RngState(3))]
        again = [b.tolist() for b in iterate_batches(images, 5, RngState(3))]
        assert first == again

    def test_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            ImageDataset(np.zeros((2, 10)), 3, 3)

    def test_load_images_limit(self, tmp_path, fixture_bytes):
        path = tmp_path / "images.idx"
        path.write_bytes(fixture_bytes)
        dataset = load_images(path, limit=100)
        assert dataset.count == 100
        assert dataset.pixel_range == NORMALIZED_RANGE

    def test_load_images_refuses_labels(self, tmp_path):
        path = tmp_path / "labels.idx"
        path.write_bytes(write_idx(np.zeros(3, dtype=np.uint8)))
        with pytest.raises(ArgumentError):
            load_images(path)


class TestSyntheticManifold:
    def setup_method(self):
        self.manifold = make_synthetic_manifold(64, 8, RngState(0))

    def test_columns_orthonormal(self):
        W = self.manifold.W
        assert np.allclose(W.T @ W, np.eye(8), atol=1e-12)

    def test_projection_is_idempotent_and_fixes_range(self):
        x = sample_gaussian(RngState(1), 64)
        p = self.manifold.exact_project(x)
        assert np.allclose(self.manifold.exact_project(p), p, atol=1e-12)
        on = self.manifold.sample(3, RngState(2))
        assert np.allclose(self.manifold.exact_project(on), on, atol=1e-12)

    def test_pinv_inverts_generate(self):
        z = sample_gaussian(RngState(3), (4, 8))
        assert np.allclose(self.manifold.exact_pinv(self.manifold.generate(z)), z, atol=1e-12)

    def test_networks_match_closed_forms(self):
        x = sample_gaussian(RngState(4), (3, 64))
        G, P = self.manifold.generator_network(), self.manifold.pinv_network()
        assert np.allclose(mlp_forward(G, mlp_forward(P, x)), self.manifold.exact_project(x), atol=1e-12)

    def test_invalid_latent_width(self):
        with pytest.raises(ArgumentError):
            make_synthetic_manifold(4, 5, RngState(0))
