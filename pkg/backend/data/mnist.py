"""
MNIST loading and (optional) download.
"""

import os
from pathlib import Path
from typing import Dict, Optional, Union

from ..errors import ArgumentError, DependencyError
from ..logging_utils import get_logger
from .idx import load_idx_file
from .images import ImageDataset, normalize_images

logger = get_logger(__name__)

REQUESTS_AVAILABLE = False
try:
    import requests
    REQUESTS_AVAILABLE = True
except ImportError:
    requests = None

MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist"
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte.gz",
    "train_labels": "train-labels-idx1-ubyte.gz",
    "test_images": "t10k-images-idx3-ubyte.gz",
    "test_labels": "t10k-labels-idx1-ubyte.gz",
}


def default_data_dir() -> Path:
    return Path(os.getenv("GPCS_DATA_DIR", "./data/mnist"))


def load_images(path: Union[str, Path], split: str = "train", limit: Optional[int] = None) -> ImageDataset:
    """Load an IDX image file, normalise to [-1, 1], optionally keep the first `limit` images."""
    dataset = load_idx_file(path, split=split)
    if not isinstance(dataset, ImageDataset):
        raise ArgumentError(f"{path} is a label file, expected images")
    if limit is not None:
        dataset = dataset.subset(limit)
    logger.info(f"Loaded {dataset.count} {split} images ({dataset.rows}x{dataset.cols}) from {path}")
    return normalize_images(dataset)


def fetch_mnist(target_dir: Optional[Union[str, Path]] = None, mirror: str = MNIST_MIRROR) -> Dict[str, Path]:
    """Download the four MNIST files unless already present."""
    if not REQUESTS_AVAILABLE:
        raise DependencyError("fetch-mnist needs the optional 'requests' package")
    target = Path(target_dir) if target_dir else default_data_dir()
    target.mkdir(parents=True, exist_ok=True)

    paths = {}
    for key, filename in MNIST_FILES.items():
        path = target / filename
        if not path.exists():
            logger.info(f"Downloading {mirror}/{filename}")
            response = requests.get(f"{mirror}/{filename}", timeout=60)
            response.raise_for_status()
            path.write_bytes(response.content)
        paths[key] = path
    return paths
