"""Thin image codec layer: decode to numpy, encode from numpy, tile grids.

Pillow is used only here, strictly as a file codec; all pixel math in the
package operates on numpy arrays.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff")


def load_rgb(path) -> np.ndarray:
    """Decode any supported image file to an (h, w, 3) uint8 array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(path, array: np.ndarray) -> None:
    """Encode a uint8 grayscale (h, w) or color (h, w, 3) array."""
    if array.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {array.dtype}")
    if array.ndim == 2:
        Image.fromarray(array, mode="L").save(path)
    elif array.ndim == 3 and array.shape[2] == 3:
        Image.fromarray(array, mode="RGB").save(path)
    else:
        raise ValueError(f"expected (h, w) or (h, w, 3), got {array.shape}")


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Min-max scale a real-valued map to the full 0..255 range.

    A constant map comes back all zeros.
    """
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = (values.astype(np.float64) - lo) * (255.0 / (hi - lo))
    return np.floor(scaled + 0.5).astype(np.uint8)


def tile_grid(tiles: list[np.ndarray], columns: int, pad: int = 2) -> np.ndarray:
    """Lay uint8 tiles of one shape out row-major on a black background."""
    if not tiles:
        raise ValueError("no tiles to lay out")
    shape = tiles[0].shape
    for t in tiles:
        if t.shape != shape or t.dtype != np.uint8:
            raise ValueError("tiles must share one uint8 shape")
    columns = max(1, min(columns, len(tiles)))
    rows = -(-len(tiles) // columns)
    th, tw = shape[:2]
    grid_shape = (rows * (th + pad) + pad, columns * (tw + pad) + pad) + shape[2:]
    grid = np.zeros(grid_shape, dtype=np.uint8)
    for idx, tile in enumerate(tiles):
        r, c = divmod(idx, columns)
        y = pad + r * (th + pad)
        x = pad + c * (tw + pad)
        grid[y:y + th, x:x + tw] = tile
    return grid
