"""Datasets: bit-exact IDX loading and a separable synthetic generator.

The synthetic dataset draws one smooth spatial pattern per class and adds
pixel noise; generation verifies (by running a one-vs-rest perceptron to
zero training error) that the result is linearly separable in pixel space
and fails loudly otherwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..augment import ImageBatch, resize_bicubic
from ..errors import DataError, DataFormatError
from ..goai import LabelBatch
from ..numeric import Rng

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

PERCEPTRON_MAX_EPOCHS = 500


def _read_be32(raw: bytes, offset: int, path) -> int:
    if offset + 4 > len(raw):
        raise DataFormatError(f"{path}: truncated header at offset {offset}")
    return struct.unpack_from(">I", raw, offset)[0]


def load_idx(images_path, labels_path):
    """Parse an IDX image/label file pair into ([0,1] pixels, class ids).

    Big-endian layout: magic, count (and rows/cols for images), then
    unsigned bytes. Image and label counts must agree.
    """
    img_raw = Path(images_path).read_bytes()
    magic = _read_be32(img_raw, 0, images_path)
    if magic != IMAGES_MAGIC:
        raise DataFormatError(
            f"{images_path}: bad magic 0x{magic:08x} at offset 0 (expected 0x{IMAGES_MAGIC:08x})"
        )
    count = _read_be32(img_raw, 4, images_path)
    rows = _read_be32(img_raw, 8, images_path)
    cols = _read_be32(img_raw, 12, images_path)
    expected = 16 + count * rows * cols
    if len(img_raw) != expected:
        raise DataFormatError(
            f"{images_path}: expected {expected} bytes for {count} images of {rows}x{cols}, "
            f"got {len(img_raw)}"
        )
    pixels = np.frombuffer(img_raw, dtype=np.uint8, offset=16).reshape(count, 1, rows, cols)

    lbl_raw = Path(labels_path).read_bytes()
    magic = _read_be32(lbl_raw, 0, labels_path)
    if magic != LABELS_MAGIC:
        raise DataFormatError(
            f"{labels_path}: bad magic 0x{magic:08x} at offset 0 (expected 0x{LABELS_MAGIC:08x})"
        )
    lbl_count = _read_be32(lbl_raw, 4, labels_path)
    if len(lbl_raw) != 8 + lbl_count:
        raise DataFormatError(
            f"{labels_path}: expected {8 + lbl_count} bytes for {lbl_count} labels, got {len(lbl_raw)}"
        )
    if lbl_count != count:
        raise DataError(f"{images_path} has {count} images but {labels_path} has {lbl_count} labels")
    ids = np.frombuffer(lbl_raw, dtype=np.uint8, offset=8).astype(np.int64)
    num_classes = int(ids.max()) + 1 if ids.size else 2
    return ImageBatch(pixels.astype(np.float64) / 255.0), LabelBatch(ids, max(num_classes, 2))


def write_idx(images: ImageBatch, labels: LabelBatch, images_path, labels_path) -> None:
    """Write a dataset as an IDX pair (pixels quantized to bytes)."""
    if images.c != 1:
        raise DataError(f"IDX export supports single-channel images, got {images.c} channels")
    pixels = np.clip(np.rint(images.data * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, images.n, images.h, images.w))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, labels.n))
        f.write(labels.ids.astype(np.uint8).tobytes())


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    """Per-class smooth pattern + additive Gaussian pixel noise."""

    classes: int = 4
    per_class: int = 128
    height: int = 16
    width: int = 16
    channels: int = 1
    noise: float = 0.05
    pattern_grid: int = 4  # patterns are bicubic upsamples of this many control points per side
    pattern_low: float = 0.2
    pattern_high: float = 0.8


def perceptron_separates(x: np.ndarray, ids: np.ndarray, num_classes: int,
                         max_epochs: int = PERCEPTRON_MAX_EPOCHS):
    """One-vs-rest perceptron oracle: epochs until zero training errors,
    or None if any class fails to separate within the budget."""
    n = x.shape[0]
    feats = np.concatenate([x.reshape(n, -1), np.ones((n, 1))], axis=1)
    worst = 0
    for k in range(num_classes):
        target = np.where(ids == k, 1.0, -1.0)
        w = np.zeros(feats.shape[1])
        for epoch in range(1, max_epochs + 1):
            mistakes = 0
            for i in range(n):
                if target[i] * (feats[i] @ w) <= 0.0:
                    w += target[i] * feats[i]
                    mistakes += 1
            if mistakes == 0:
                worst = max(worst, epoch)
                break
        else:
            return None
    return worst


def gen_synthetic(spec: SyntheticDatasetSpec, rng: Rng):
    """Deterministic separable dataset: class pattern + clipped pixel noise."""
    h, w, c = spec.height, spec.width, spec.channels
    patterns = []
    for _ in range(spec.classes):
        grid = rng.uniform(0.0, 1.0, size=c * spec.pattern_grid * spec.pattern_grid).reshape(
            c, spec.pattern_grid, spec.pattern_grid
        )
        up = resize_bicubic(grid, h, w)
        lo, hi = up.min(), up.max()
        span = hi - lo if hi > lo else 1.0
        patterns.append(spec.pattern_low + (spec.pattern_high - spec.pattern_low) * (up - lo) / span)

    n = spec.classes * spec.per_class
    data = np.empty((n, c, h, w))
    ids = np.empty(n, dtype=np.int64)
    for k in range(spec.classes):
        for j in range(spec.per_class):
            i = k * spec.per_class + j
            noise = spec.noise * rng.normal(size=c * h * w).reshape(c, h, w) if spec.noise > 0 else 0.0
            data[i] = np.clip(patterns[k] + noise, 0.0, 1.0)
            ids[i] = k

    epochs = perceptron_separates(data, ids, spec.classes)
    if epochs is None:
        means = np.stack([data[ids == k].reshape(spec.per_class, -1).mean(axis=0) for k in range(spec.classes)])
        dmin = min(
            float(np.linalg.norm(means[a] - means[b]))
            for a in range(spec.classes)
            for b in range(a + 1, spec.classes)
        )
        hint = dmin / (4.0 * np.sqrt(c * h * w))
        raise DataError(
            f"synthetic dataset is not linearly separable at noise level {spec.noise}; "
            f"closest class means are {dmin:.4f} apart, try noise <= {hint:.4f}"
        )
    return ImageBatch(data), LabelBatch(ids, spec.classes)


def train_test_split(images: ImageBatch, labels: LabelBatch, test_fraction: float, rng: Rng):
    """Shuffled split into ((train_x, train_y), (test_x, test_y))."""
    n = images.n
    order = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    test_idx = order[:n_test]
    train_idx = order[n_test:]
    return (
        (images.take(train_idx), labels.take(train_idx)),
        (images.take(test_idx), labels.take(test_idx)),
    )
