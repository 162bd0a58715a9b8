"""
Image datasets, normalisation and batching.
"""

from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np

from ..errors import ArgumentError, DatasetStateError
from ..neural.rng import RngState

RAW_RANGE = "raw"               # pixels in [0, 255]
NORMALIZED_RANGE = "normalized"  # pixels in [-1, 1]


@dataclass(frozen=True, eq=False)
class ImageDataset:
    images: np.ndarray  # count x (rows*cols), float64
    rows: int
    cols: int
    pixel_range: str = RAW_RANGE
    split: str = "train"

    def __post_init__(self):
        if self.images.ndim != 2 or self.images.shape[1] != self.rows * self.cols:
            raise ArgumentError(f"Images {self.images.shape} do not match {self.rows}x{self.cols}")
        if self.pixel_range not in (RAW_RANGE, NORMALIZED_RANGE):
            raise ArgumentError(f"Unknown pixel range '{self.pixel_range}'")

    @property
    def count(self) -> int:
        return self.images.shape[0]

    @property
    def n(self) -> int:
        return self.images.shape[1]

    def subset(self, count: int, offset: int = 0) -> "ImageDataset":
        return replace(self, images=self.images[offset:offset + count].copy())

    def range_ok(self) -> bool:
        if self.count == 0:
            return True
        low, high = (0.0, 255.0) if self.pixel_range == RAW_RANGE else (-1.0, 1.0)
        return float(self.images.min()) >= low and float(self.images.max()) <= high


def normalize_images(dataset: ImageDataset) -> ImageDataset:
    """Map raw [0, 255] pixels to [-1, 1] via x / 127.5 - 1."""
    if dataset.pixel_range != RAW_RANGE:
        raise DatasetStateError("Dataset is already normalized")
    return replace(dataset, images=dataset.images / 127.5 - 1.0, pixel_range=NORMALIZED_RANGE)


def denormalize_pixels(images: np.ndarray) -> np.ndarray:
    """[-1, 1] pixels to rounded uint8 bytes (values outside the range are clipped)."""
    raw = np.rint((np.asarray(images, dtype=np.float64) + 1.0) * 127.5)
    return np.clip(raw, 0, 255).astype(np.uint8)


def denormalize_images(dataset: ImageDataset) -> ImageDataset:
    if dataset.pixel_range != NORMALIZED_RANGE:
        raise DatasetStateError("Dataset is not normalized")
    return replace(dataset, images=denormalize_pixels(dataset.images).astype(np.float64), pixel_range=RAW_RANGE)


def iterate_batches(images: np.ndarray, batch_size: int, rng: Optional[RngState] = None) -> Iterator[np.ndarray]:
    """
    Yield row batches; a seeded permutation is applied when rng is given and
    the last partial batch is kept.
    """
    if batch_size < 1:
        raise ArgumentError("batch_size must be >= 1")
    order = rng.permutation(images.shape[0]) if rng is not None else np.arange(images.shape[0])
    for start in range(0, len(order), batch_size):
        yield images[order[start:start + batch_size]]
