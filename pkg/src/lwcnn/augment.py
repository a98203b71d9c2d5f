"""Seeded real-time augmentation and the [0, 1] rescale shared by all splits.

Training batches get a per-sample random affine (flip, rotation, shear,
translation), a brightness factor, then the 1/255 rescale; evaluation
batches get the rescale only. Every sample draws from its own generator
seeded by (global_seed, epoch, sample_index), so results never depend on
batch order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AugmentConfig:
    rotation_max_deg: float = 10.0
    brightness_delta: float = 0.15
    shear_max: float = 0.125
    shift_frac: float = 0.002
    hflip_enabled: bool = True
    rescale: float = 1.0 / 255.0

    def __post_init__(self):
        if min(self.rotation_max_deg, self.brightness_delta,
               self.shear_max, self.shift_frac) < 0:
            raise ValueError("augmentation ranges must be non-negative")
        if self.brightness_delta >= 1.0:
            raise ValueError(f"brightness_delta must be < 1, got {self.brightness_delta}")


@dataclass(frozen=True)
class AugmentParams:
    angle_deg: float = 0.0
    brightness: float = 1.0
    shear: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    flip: bool = False


def sample_stream(global_seed: int, epoch: int, sample_index: int) -> np.random.Generator:
    """Per-sample generator; the seed tuple fully determines the stream."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([global_seed, epoch, sample_index]))
    )


def sample_params(cfg: AugmentConfig, stream: np.random.Generator,
                  size: tuple[int, int] = (150, 150)) -> AugmentParams:
    """Draw one parameter set; draw order is part of the determinism contract."""
    h, w = size
    angle = float(stream.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg))
    brightness = float(stream.uniform(1.0 - cfg.brightness_delta, 1.0 + cfg.brightness_delta))
    shear = float(stream.uniform(-cfg.shear_max, cfg.shear_max))
    dx = float(stream.uniform(-cfg.shift_frac * w, cfg.shift_frac * w))
    dy = float(stream.uniform(-cfg.shift_frac * h, cfg.shift_frac * h))
    flip = bool(stream.random() < 0.5) if cfg.hflip_enabled else False
    return AugmentParams(angle, brightness, shear, dx, dy, flip)


def _bilinear_sample(img: np.ndarray, src_y: np.ndarray, src_x: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    # Nearest-edge fill: clamp the sample coordinates into the frame.
    sy = np.clip(src_y, 0.0, h - 1.0)
    sx = np.clip(src_x, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(int)
    x0 = np.floor(sx).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = sy - y0
    fx = sx - x0
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    data = img.astype(np.float64)
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bottom = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def apply_affine(img: np.ndarray, p: AugmentParams) -> np.ndarray:
    """One combined affine about the image center: flip, rotate, shear, translate.

    Positive angles rotate content counterclockwise in (x right, y down)
    coordinates; shear is the factor s in x' = x + s*y. Samples falling
    outside the frame take nearest-edge values.
    """
    if img.ndim not in (2, 3):
        raise ValueError(f"expected 2-d or 3-d image, got shape {img.shape}")
    h, w = img.shape[:2]
    theta = np.deg2rad(p.angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    # Inverse map, output pixel -> source pixel: undo translate, shear,
    # rotate, flip in that order (reverse of the forward composition).
    rot_inv = np.array([[cos_t, sin_t], [-sin_t, cos_t]])
    shear_inv = np.array([[1.0, -p.shear], [0.0, 1.0]])
    flip_mat = np.array([[-1.0, 0.0], [0.0, 1.0]]) if p.flip else np.eye(2)
    linear = flip_mat @ rot_inv @ shear_inv
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    qx = xs - cx - p.dx
    qy = ys - cy - p.dy
    src_x = linear[0, 0] * qx + linear[0, 1] * qy + cx
    src_y = linear[1, 0] * qx + linear[1, 1] * qy + cy
    out = _bilinear_sample(img, src_y, src_x)
    return np.floor(np.clip(out, 0.0, 255.0) + 0.5).astype(np.uint8)


def apply_brightness(img: np.ndarray, factor: float) -> np.ndarray:
    """Scale pixel values, round half up, clamp to the uint8 range."""
    if factor <= 0:
        raise ValueError(f"brightness factor must be positive, got {factor}")
    out = np.floor(img.astype(np.float64) * factor + 0.5)
    return np.clip(out, 0.0, 255.0).astype(np.uint8)


def normalize(img: np.ndarray, expected_hw: tuple[int, int] | None = (150, 150)) -> np.ndarray:
    """Map uint8 pixels to float32 in [0, 1] by dividing by 255."""
    if expected_hw is not None and tuple(img.shape[:2]) != tuple(expected_hw):
        raise ValueError(f"expected {expected_hw} pixels, got {img.shape[:2]}")
    return img.astype(np.float32) / np.float32(255.0)


def augment_batch(samples: np.ndarray, cfg: AugmentConfig, global_seed: int,
                  epoch: int, training: bool,
                  expected_hw: tuple[int, int] | None = (150, 150),
                  sample_indices: np.ndarray | None = None) -> np.ndarray:
    """Produce the network-ready float32 batch for one epoch.

    Training applies a fresh per-sample affine and brightness draw before the
    rescale; evaluation rescales only. Identical (seed, epoch) pairs yield
    bit-identical batches. When the batch is a shuffled slice of a larger
    set, sample_indices carries each row's dataset-order index so its draw
    stream does not depend on the shuffle.
    """
    samples = np.asarray(samples)
    if samples.ndim != 4:
        raise ValueError(f"expected (n, h, w, c) samples, got shape {samples.shape}")
    h, w = samples.shape[1:3]
    if expected_hw is not None and (h, w) != tuple(expected_hw):
        raise ValueError(f"expected {expected_hw} pixels, got {(h, w)}")
    if not training:
        return samples.astype(np.float32) / np.float32(255.0)
    if sample_indices is None:
        sample_indices = np.arange(samples.shape[0])
    elif len(sample_indices) != samples.shape[0]:
        raise ValueError("sample_indices length must match the batch")
    out = np.empty(samples.shape, dtype=np.float32)
    for i in range(samples.shape[0]):
        stream = sample_stream(global_seed, epoch, int(sample_indices[i]))
        p = sample_params(cfg, stream, size=(h, w))
        img = apply_affine(samples[i], p)
        img = apply_brightness(img, p.brightness)
        out[i] = normalize(img, expected_hw=None)
    return out
