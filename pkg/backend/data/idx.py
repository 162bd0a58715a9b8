"""
IDX container reader/writer (the MNIST file format).

Data format (big endian):
    [offset] [type]          [value]          [description]
    0000     32 bit integer  0x00000803(2051) magic number (images)
    0004     32 bit integer  count            number of images
    0008     32 bit integer  rows             number of rows
    0012     32 bit integer  cols             number of columns
    0016     unsigned byte   ??               pixels, row-wise

Label files use magic 0x00000801(2049) followed by the count and one byte per label.
"""

import gzip
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import (ArgumentError, IdxDimensionError, IdxLengthError,
                      IdxMagicError, IdxTruncatedError)
from .images import RAW_RANGE, ImageDataset

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# dims are signed 32-bit in the format; payloads above this are refused
MAX_DIM = 2 ** 31 - 1
MAX_PAYLOAD = 2 ** 34


def parse_idx(data: bytes, split: str = "train") -> Union[ImageDataset, np.ndarray]:
    """
    Parse an IDX byte string.

    Args:
        data: Raw (already decompressed) file contents
        split: Split tag recorded on image datasets

    Returns:
        ImageDataset with raw [0, 255] pixels for image files, uint8 label array for label files
    """
    data = bytes(data)
    if len(data) < 8:
        raise IdxTruncatedError(f"Header needs 8 bytes, got {len(data)}")
    magic, count = struct.unpack_from(">II", data, 0)

    if magic == IMAGE_MAGIC:
        if len(data) < 16:
            raise IdxTruncatedError(f"Image header needs 16 bytes, got {len(data)}")
        rows, cols = struct.unpack_from(">II", data, 8)
        dims = (count, rows, cols)
        header = 16
    elif magic == LABEL_MAGIC:
        dims = (count,)
        header = 8
    else:
        raise IdxMagicError(f"Unknown IDX magic 0x{magic:08x}")

    if any(d > MAX_DIM for d in dims):
        raise IdxDimensionError(f"Dimension overflow in header {dims}")
    expected = int(np.prod(dims, dtype=object))
    if expected > MAX_PAYLOAD:
        raise IdxDimensionError(f"Declared payload of {expected} bytes is too large")

    payload = len(data) - header
    if payload < expected:
        raise IdxTruncatedError(f"Truncated payload: header declares {expected} bytes, found {payload}")
    if payload > expected:
        raise IdxLengthError(f"Payload has {payload - expected} trailing bytes")

    values = np.frombuffer(data, dtype=np.uint8, count=expected, offset=header)
    if magic == LABEL_MAGIC:
        return values.copy()
    count, rows, cols = dims
    return ImageDataset(values.reshape(count, rows * cols).astype(np.float64), rows, cols, RAW_RANGE, split)


def write_idx(values: np.ndarray) -> bytes:
    """
    Encode uint8 data as IDX: a (count, rows, cols) array becomes an image
    file, a (count,) array a label file.
    """
    values = np.asarray(values)
    if values.dtype != np.uint8:
        raise ArgumentError(f"IDX writer expects uint8 data, got {values.dtype}")
    if values.ndim == 3:
        header = struct.pack(">IIII", IMAGE_MAGIC, *values.shape)
    elif values.ndim == 1:
        header = struct.pack(">II", LABEL_MAGIC, values.shape[0])
    else:
        raise ArgumentError(f"IDX writer expects 1-D labels or 3-D images, got {values.ndim}-D")
    return header + np.ascontiguousarray(values).tobytes()


def load_idx_file(path: Union[str, Path], split: str = "train") -> Union[ImageDataset, np.ndarray]:
    """Read an IDX file from disk; '.gz' files are decompressed transparently."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"IDX file not found: {path}")
    raw = gzip.decompress(path.read_bytes()) if path.suffix == ".gz" else path.read_bytes()
    return parse_idx(raw, split=split)
