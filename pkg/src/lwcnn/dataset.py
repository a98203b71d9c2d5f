"""Dataset indexing, stratified splitting, k-fold partitioning, batch assembly.

A dataset root holds exactly four class subdirectories (alphabetical order
fixes the label ids): glioma=0, meningioma=1, notumor=2, pituitary=3.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .imgio import IMAGE_EXTENSIONS, load_rgb
from .preprocess import CropParams, bilinear_resize, crop_pipeline

log = logging.getLogger(__name__)

CLASS_NAMES = ("glioma", "meningioma", "notumor", "pituitary")
NUM_CLASSES = len(CLASS_NAMES)

# Seed-stream namespaces; large constants so they can never collide with the
# (seed, epoch, sample) tuples used for augmentation draws.
_SPLIT_TAG = 0x53504C49
_FOLD_TAG = 0x464F4C44


@dataclass(frozen=True)
class Sample:
    path: str
    label: int


@dataclass
class DatasetIndex:
    """Ordered sample list plus per-class counts."""

    samples: list[Sample]

    @property
    def class_counts(self) -> list[int]:
        counts = [0] * NUM_CLASSES
        for s in self.samples:
            counts[s.label] += 1
        return counts

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def subset(self, positions) -> "DatasetIndex":
        chosen = [self.samples[i] for i in positions]
        chosen.sort(key=lambda s: s.path)
        return DatasetIndex(chosen)


@dataclass
class FoldAssignment:
    """Fold id per sample position; folds partition the index."""

    k: int
    fold_of: np.ndarray

    def positions(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_val(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        if not 0 <= fold < self.k:
            raise ValueError(f"fold {fold} out of range for k={self.k}")
        return np.flatnonzero(self.fold_of != fold), self.positions(fold)


def scan_dataset(root) -> DatasetIndex:
    """Index every decodable image under root/<class>/, lexicographic order.

    The root must contain exactly the four class directories, each with at
    least one decodable image. Undecodable image files are skipped with a
    logged warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a directory")
    found = sorted(p.name for p in root.iterdir() if p.is_dir())
    if found != sorted(CLASS_NAMES):
        raise ValueError(
            f"{root}: expected exactly the class directories {sorted(CLASS_NAMES)}, found {found}"
        )
    samples: list[Sample] = []
    for label, name in enumerate(CLASS_NAMES):
        class_dir = root / name
        kept = 0
        for path in sorted(class_dir.iterdir()):
            if not path.is_file() or path.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            try:
                with Image.open(path) as img:
                    img.verify()
            except Exception as exc:
                log.warning("skipping undecodable image %s: %s", path, exc)
                continue
            samples.append(Sample(str(path), label))
            kept += 1
        if kept == 0:
            raise ValueError(f"{class_dir}: no decodable images for class {name!r}")
    samples.sort(key=lambda s: s.path)
    return DatasetIndex(samples)


def stratified_split_positions(index: DatasetIndex, frac: float = 0.8,
                               seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Positions (ascending) of the train and val members of a stratified split.

    Per class: seeded shuffle, round(frac*n) to train, rest to val. Ties
    round up, so remainders favor the training side.
    """
    if not 0.0 < frac < 1.0:
        raise ValueError(f"frac must be in (0, 1), got {frac}")
    counts = index.class_counts
    for label, n in enumerate(counts):
        if n < 2:
            raise ValueError(f"class {CLASS_NAMES[label]!r} has {n} samples, need >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _SPLIT_TAG]))
    train_pos: list[int] = []
    val_pos: list[int] = []
    labels = index.labels()
    for label in range(NUM_CLASSES):
        positions = np.flatnonzero(labels == label)
        perm = positions[rng.permutation(len(positions))]
        n_train = int(np.floor(frac * len(positions) + 0.5))
        train_pos.extend(perm[:n_train].tolist())
        val_pos.extend(perm[n_train:].tolist())
    return np.sort(np.array(train_pos, dtype=np.int64)), np.sort(np.array(val_pos, dtype=np.int64))


def stratified_split(index: DatasetIndex, frac: float = 0.8,
                     seed: int = 0) -> tuple[DatasetIndex, DatasetIndex]:
    """Stratified split as two sub-indexes; see stratified_split_positions."""
    train_pos, val_pos = stratified_split_positions(index, frac, seed)
    return index.subset(train_pos), index.subset(val_pos)


def stratified_kfold(index: DatasetIndex, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Per-class seeded shuffle, then round-robin assignment to k folds."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    counts = index.class_counts
    for label, n in enumerate(counts):
        if n < k:
            raise ValueError(f"class {CLASS_NAMES[label]!r} has {n} samples, need >= k={k}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _FOLD_TAG]))
    fold_of = np.empty(len(index), dtype=np.int64)
    labels = index.labels()
    for label in range(NUM_CLASSES):
        positions = np.flatnonzero(labels == label)
        perm = positions[rng.permutation(len(positions))]
        for i, pos in enumerate(perm):
            fold_of[pos] = i % k
    return FoldAssignment(k, fold_of)


def one_hot(labels: np.ndarray, num_classes: int = NUM_CLASSES) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels outside [0, {num_classes})")
    out = np.zeros((len(labels), num_classes), dtype=np.float32)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def load_batch(samples: list[Sample], size: int = 150, crop: bool = False,
               crop_params: CropParams | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Decode samples into a raw uint8 (n, size, size, 3) tensor plus one-hot labels.

    crop=True runs the contour-crop pipeline per image; otherwise images are
    resized directly when their size differs.
    """
    if not samples:
        raise ValueError("empty sample list")
    if crop_params is None:
        crop_params = CropParams(out_size=(size, size))
    x = np.empty((len(samples), size, size, 3), dtype=np.uint8)
    for i, sample in enumerate(samples):
        try:
            img = load_rgb(sample.path)
        except Exception as exc:
            raise ValueError(f"failed to decode {sample.path}: {exc}") from exc
        if crop:
            img = crop_pipeline(img, crop_params).image
        if img.shape[:2] != (size, size):
            img = bilinear_resize(img, size, size)
        x[i] = img
    y = one_hot(np.array([s.label for s in samples], dtype=np.int64))
    return x, y
