"""Shared fixtures: synthetic image classes, on-disk dataset trees, and a
finite-difference gradient checker."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from lwcnn.dataset import CLASS_NAMES
from lwcnn.imgio import save_image

from oracles import max_relative_error, numeric_gradient


# ---------------------------------------------------------------------------
# Synthetic image classes. Four visually distinct grayscale-ish patterns so a
# small network can separate them without a real scan in sight.
# ---------------------------------------------------------------------------

def _pattern_image(label: int, size: int, rng: np.random.Generator) -> np.ndarray:
    img = rng.integers(0, 20, size=(size, size), dtype=np.int64)
    yy, xx = np.mgrid[0:size, 0:size]
    cy = size / 2 + rng.uniform(-size * 0.05, size * 0.05)
    cx = size / 2 + rng.uniform(-size * 0.05, size * 0.05)
    bright = int(rng.integers(200, 256))
    if label == 0:
        r = size * rng.uniform(0.22, 0.3)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    elif label == 1:
        outer = size * rng.uniform(0.3, 0.38)
        inner = outer - size * 0.1
        dy, dx = np.abs(yy - cy), np.abs(xx - cx)
        box = np.maximum(dy, dx)
        mask = (box <= outer) & (box > inner)
    elif label == 2:
        period = max(4, int(size * rng.uniform(0.1, 0.16)))
        mask = (yy // (period // 2)) % 2 == 0
    else:
        thickness = max(2, size // 18)
        mask = (np.abs(yy - xx) < thickness) | (np.abs(yy + xx - (size - 1)) < thickness)
    img = np.where(mask, bright, img)
    return np.repeat(img[:, :, None], 3, axis=2).astype(np.uint8)


def make_pattern_batch(n_per_class: int, size: int, seed: int):
    """Returns (x uint8 [n,h,w,3], labels int64 [n]) in class-blocked order."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for label in range(4):
        for _ in range(n_per_class):
            images.append(_pattern_image(label, size, rng))
            labels.append(label)
    return np.stack(images), np.array(labels, dtype=np.int64)


def write_class_tree(root: Path, n_per_class: int, size: int, seed: int,
                     splits=("Training", "Testing")) -> Path:
    """Writes a {split}/{class}/*.png tree of pattern images under root."""
    rng = np.random.default_rng(seed)
    for split in splits:
        for label, name in enumerate(CLASS_NAMES):
            folder = root / split / name
            folder.mkdir(parents=True, exist_ok=True)
            for i in range(n_per_class):
                save_image(folder / f"img_{i:03d}.png",
                           _pattern_image(label, size, rng))
    return root


@pytest.fixture()
def pattern_batch():
    return make_pattern_batch


@pytest.fixture()
def class_tree(tmp_path):
    def build(n_per_class: int = 3, size: int = 24, seed: int = 7,
              splits=("Training", "Testing")) -> Path:
        return write_class_tree(tmp_path / "data", n_per_class, size, seed, splits)
    return build


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def check_gradients(forward_fn, backward_fn, inputs, tol: float = 1e-4,
                    h: float = 1e-5) -> float:
    """Compares analytic gradients against central finite differences.

    forward_fn() -> output array computed from the (float64) arrays in
    `inputs`; backward_fn(grad_out) -> list of gradients aligned with
    `inputs`. The scalar loss is a fixed random projection of the output so
    every output element influences it.
    """
    out = forward_fn()
    proj = np.random.default_rng(99).standard_normal(out.shape)

    def loss() -> float:
        return float(np.sum(forward_fn() * proj))

    loss()  # prime any caches before requesting gradients
    analytic = backward_fn(proj.copy())
    worst = 0.0
    for array, grad in zip(inputs, analytic):
        numeric = numeric_gradient(loss, array, h=h)
        worst = max(worst, max_relative_error(grad, numeric))
    assert worst < tol, f"max relative gradient error {worst:.3e} >= {tol}"
    return worst


@pytest.fixture()
def gradcheck():
    return check_gradients
