"""Contour-based cropping of brain scans before resizing to the network input.

The pipeline isolates the largest bright region of a scan and crops the
original image to its bounding box: grayscale, 5x5 Gaussian smoothing,
fixed-level threshold, two erosions then two dilations to drop specks and
restore extent, largest 8-connected component, inclusive bounding box,
bilinear resize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # np.round ties to even; the pipeline rounds .5 up everywhere.
    return np.floor(x + 0.5)


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel bounds of a region."""

    top: int
    left: int
    bottom: int
    right: int

    def __post_init__(self):
        if self.top > self.bottom or self.left > self.right:
            raise ValueError(f"degenerate box {self}")

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def width(self) -> int:
        return self.right - self.left + 1


@dataclass(frozen=True)
class CropParams:
    threshold: int = 45
    erode_iterations: int = 2
    dilate_iterations: int = 2
    blur_sigma: float = 1.1
    out_size: tuple[int, int] = (150, 150)


@dataclass
class CropResult:
    image: np.ndarray
    box: BoundingBox | None
    used_fallback: bool


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Luma conversion of an RGB uint8 image; grayscale input passes through."""
    if image.ndim == 2:
        return image.astype(np.uint8, copy=False)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (h, w) or (h, w, 3), got {image.shape}")
    r, g, b = GRAY_WEIGHTS
    gray = r * image[..., 0] + g * image[..., 1] + b * image[..., 2]
    return _round_half_up(gray).astype(np.uint8)


def gaussian_kernel5(sigma: float = 1.1) -> np.ndarray:
    """Normalized 5x5 Gaussian tap weights."""
    offsets = np.arange(-2, 3, dtype=np.float64)
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def gaussian_blur5(gray: np.ndarray, sigma: float = 1.1) -> np.ndarray:
    """5x5 Gaussian smoothing with mirrored borders, rounded back to uint8."""
    if gray.ndim != 2:
        raise ValueError(f"expected a 2-d image, got shape {gray.shape}")
    kernel = gaussian_kernel5(sigma)
    padded = np.pad(gray.astype(np.float64), 2, mode="reflect")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (5, 5))
    out = np.einsum("ijab,ab->ij", windows, kernel)
    return _round_half_up(np.clip(out, 0.0, 255.0)).astype(np.uint8)


def threshold_mask(gray: np.ndarray, level: int = 45) -> np.ndarray:
    """Foreground is strictly brighter than the level."""
    return gray > level


def _shift_reduce(mask: np.ndarray, combine) -> np.ndarray:
    # 3x3 square structuring element; outside the image counts as background.
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    h, w = mask.shape
    out = padded[1:1 + h, 1:1 + w].copy()
    for di in (0, 1, 2):
        for dj in (0, 1, 2):
            if di == 1 and dj == 1:
                continue
            combine(out, padded[di:di + h, dj:dj + w], out=out)
    return out


def erode(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    out = mask.astype(bool, copy=False)
    for _ in range(iterations):
        out = _shift_reduce(out, np.logical_and)
    return out


def dilate(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    out = mask.astype(bool, copy=False)
    for _ in range(iterations):
        out = _shift_reduce(out, np.logical_or)
    return out


def largest_component_bbox(mask: np.ndarray) -> BoundingBox | None:
    """Bounding box of the largest 8-connected foreground component.

    Ties on area go to the component whose first pixel appears earliest in
    row-major order. Returns None for an empty mask.
    """
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return None
    areas = np.bincount(labels.ravel())[1:]
    best_area = areas.max()
    candidates = np.flatnonzero(areas == best_area) + 1
    if len(candidates) == 1:
        chosen = int(candidates[0])
    else:
        flat = labels.ravel()
        chosen = int(min(candidates, key=lambda c: int(np.argmax(flat == c))))
    rows, cols = np.nonzero(labels == chosen)
    return BoundingBox(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize with half-pixel-centered sampling and edge clamping.

    uint8 input comes back as uint8 (ties round up); float input stays float.
    """
    if image.ndim not in (2, 3):
        raise ValueError(f"expected 2-d or 3-d image, got shape {image.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {(out_h, out_w)}")
    in_h, in_w = image.shape[:2]
    src_y = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(src_y).astype(int)
    x0 = np.floor(src_x).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (src_y - y0)[:, None]
    wx = (src_x - x0)[None, :]
    if image.ndim == 3:
        wy = wy[..., None]
        wx = wx[..., None]
    data = image.astype(np.float64)
    top = data[y0][:, x0] * (1.0 - wx) + data[y0][:, x1] * wx
    bottom = data[y1][:, x0] * (1.0 - wx) + data[y1][:, x1] * wx
    out = top * (1.0 - wy) + bottom * wy
    if image.dtype == np.uint8:
        return _round_half_up(np.clip(out, 0.0, 255.0)).astype(np.uint8)
    return out.astype(image.dtype, copy=False)


def crop_pipeline(image: np.ndarray, params: CropParams = CropParams()) -> CropResult:
    """Crop to the dominant bright region and resize to the model input size.

    Falls back to resizing the whole image when nothing survives the
    threshold and morphology.
    """
    gray = to_grayscale(image)
    blurred = gaussian_blur5(gray, params.blur_sigma)
    mask = threshold_mask(blurred, params.threshold)
    mask = erode(mask, params.erode_iterations)
    mask = dilate(mask, params.dilate_iterations)
    box = largest_component_bbox(mask)
    out_h, out_w = params.out_size
    if box is None:
        return CropResult(bilinear_resize(image, out_h, out_w), None, True)
    region = image[box.top:box.bottom + 1, box.left:box.right + 1]
    return CropResult(bilinear_resize(region, out_h, out_w), box, False)
