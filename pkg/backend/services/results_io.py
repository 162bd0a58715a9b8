"""
Result files: the experiment CSV and binary PGM image grids.
"""

import csv
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from ..data.images import denormalize_pixels
from ..errors import ArgumentError
from ..logging_utils import get_logger

logger = get_logger(__name__)

RESULT_COLUMNS = ['model', 'solver', 'm', 'ratio', 'snr_db', 'mse', 'residual', 'mssim',
                  'mean_wall_ms_per_image', 'seed']
SEPARATOR_GRAY = 128


def _sort_key(row: Dict[str, Any]) -> Tuple[str, str, float]:
    snr = row['snr_db']
    return str(row['model']), str(row['solver']), math.inf if snr in (None, 'noiseless') else float(snr)


def results_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """Rows in output order; noiseless snr_db is written as inf."""
    missing = [c for row in rows for c in RESULT_COLUMNS if c not in row]
    if missing:
        raise ArgumentError(f"Result rows are missing columns: {sorted(set(missing))}")
    ordered = sorted(rows, key=_sort_key)
    frame = pd.DataFrame([{c: row[c] for c in RESULT_COLUMNS} for row in ordered], columns=RESULT_COLUMNS)
    frame['snr_db'] = [_sort_key(row)[2] for row in ordered]
    return frame


def write_results_csv(rows: Sequence[Dict[str, Any]], path: Union[str, Path]) -> Path:
    """
    Write results.csv with the fixed header, sorted by model, solver and snr_db.

    Args:
        rows: One dict per (model, solver, snr) cell
        path: Destination file

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results_frame(rows).to_csv(path, index=False, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    logger.info(f"Wrote {len(rows)} result rows to {path}")
    return path


def read_results_csv(path: Union[str, Path]) -> List[Dict[str, Any]]:
    frame = pd.read_csv(path, float_precision="round_trip", dtype={'model': str, 'solver': str})
    if list(frame.columns) != RESULT_COLUMNS:
        raise ArgumentError(f"{path}: unexpected header {list(frame.columns)}")
    rows = frame.to_dict(orient='records')
    for row in rows:
        row['m'] = int(row['m'])
        row['seed'] = int(row['seed'])
    return rows


def tile_images(images: np.ndarray, cols: int, shape: Tuple[int, int]) -> np.ndarray:
    """Row-major tiling of [-1, 1] images into a uint8 grid with 1-px mid-gray separators."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 1:
        images = images[None, :]
    rows_px, cols_px = shape
    if images.ndim != 2 or images.shape[1] != rows_px * cols_px:
        raise ArgumentError(f"Images of shape {images.shape} do not all have {rows_px}x{cols_px} pixels")
    count = images.shape[0]
    if count == 0:
        raise ArgumentError("No images to tile")
    if cols < 1:
        raise ArgumentError("cols must be >= 1")

    cols = min(cols, count)
    grid_rows = math.ceil(count / cols)
    height = grid_rows * rows_px + grid_rows - 1
    width = cols * cols_px + cols - 1
    grid = np.full((height, width), SEPARATOR_GRAY, dtype=np.uint8)
    pixels = denormalize_pixels(images)
    for i in range(count):
        r, c = divmod(i, cols)
        top, left = r * (rows_px + 1), c * (cols_px + 1)
        grid[top:top + rows_px, left:left + cols_px] = pixels[i].reshape(rows_px, cols_px)
    return grid


def write_pgm_grid(images: Union[np.ndarray, Sequence[np.ndarray]], cols: int, path: Union[str, Path],
                   shape: Optional[Tuple[int, int]] = None) -> Path:
    """
    Write images as one binary PGM (P5, maxval 255).

    Args:
        images: Flat images (C x rows*cols) or 2-D images, pixels in [-1, 1]
        cols: Tiles per grid row (capped at the image count)
        path: Destination .pgm file
        shape: Image shape for flat input; square images are inferred

    Raises:
        ArgumentError: images of mixed dimensions
    """
    if not isinstance(images, np.ndarray):
        shapes = {np.shape(image) for image in images}
        if len(shapes) != 1:
            raise ArgumentError(f"Images have mixed dimensions: {sorted(shapes)}")
        images = np.stack([np.asarray(image, dtype=np.float64) for image in images])
    if images.ndim == 3:
        shape = shape or images.shape[1:]
        images = images.reshape(images.shape[0], -1)
    if shape is None:
        side = math.isqrt(images.shape[-1])
        if side * side != images.shape[-1]:
            raise ArgumentError(f"Cannot infer a square shape for {images.shape[-1]} pixels; pass shape")
        shape = (side, side)

    grid = tile_images(images, cols, tuple(shape))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(grid).save(path, format="PPM")
    logger.debug(f"Wrote {grid.shape[1]}x{grid.shape[0]} grid to {path}")
    return path
