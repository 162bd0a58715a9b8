"""
Datasets: MNIST IDX files, normalisation, batching and the synthetic linear
manifold used as a numerical oracle.
"""

from .idx import IMAGE_MAGIC, LABEL_MAGIC, load_idx_file, parse_idx, write_idx
from .images import (NORMALIZED_RANGE, RAW_RANGE, ImageDataset, denormalize_images,
                     denormalize_pixels, iterate_batches, normalize_images)
from .mnist import fetch_mnist, load_images
from .synthetic import SyntheticManifold, make_synthetic_manifold

__all__ = [
    'IMAGE_MAGIC', 'LABEL_MAGIC', 'load_idx_file', 'parse_idx', 'write_idx',
    'NORMALIZED_RANGE', 'RAW_RANGE', 'ImageDataset', 'denormalize_images',
    'denormalize_pixels', 'iterate_batches', 'normalize_images',
    'fetch_mnist', 'load_images',
    'SyntheticManifold', 'make_synthetic_manifold',
]
