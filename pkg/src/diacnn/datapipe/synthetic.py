"""Seeded synthetic two-class image set for desk-scale experiments.

Class 0 images carry a horizontal bar, class 1 a vertical bar. Bar position,
thickness, colour and background colour are random; i.i.d. Gaussian noise is
added on top.
"""

from __future__ import annotations

import os

import numpy as np

from diacnn.datapipe.image import encode_png
from diacnn.datapipe.manifest import Dataset, Sample, write_manifest


def make_images(n: int, seed: int = 0, size: int = 32, noise_std: float = 20.0) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(images N x size x size x 3 uint8, labels N)`` with balanced classes."""
    if size < 16:
        raise ValueError("synthetic images need size >= 16")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    imgs = np.empty((n, size, size, 3), dtype=np.uint8)
    for i, lab in enumerate(labels):
        bg = rng.uniform(20, 110, size=3)
        fg = rng.uniform(150, 240, size=3)
        img = np.broadcast_to(bg, (size, size, 3)).copy()
        thick = int(rng.integers(3, 7))
        start = int(rng.integers(2, size - thick - 2))
        lo = int(rng.integers(0, size // 3))
        hi = size - 1 - int(rng.integers(0, size // 3))
        if lab == 0:
            img[start : start + thick, lo : hi + 1] = fg
        else:
            img[lo : hi + 1, start : start + thick] = fg
        img += rng.normal(0, noise_std, size=img.shape)
        imgs[i] = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return imgs, labels.astype(np.int64)


def to_tensor_batch(imgs: np.ndarray) -> np.ndarray:
    """uint8 N x H x W x 3 -> float32 N x 3 x H x W scaled to [0, 1]."""
    return np.ascontiguousarray(imgs.transpose(0, 3, 1, 2)).astype(np.float32) / np.float32(255.0)


def make_splits(n_train: int = 200, n_val: int = 50, n_test: int = 50, seed: int = 0, size: int = 32):
    """Independent seeded draws per split, already in network layout."""
    out = {}
    for k, (name, n) in enumerate((("train", n_train), ("val", n_val), ("test", n_test))):
        if n:
            imgs, y = make_images(n, seed * 1000 + k, size)
            out[name] = (to_tensor_batch(imgs), y)
    return out


def write_dataset(root, n_train: int = 200, n_val: int = 50, n_test: int = 50, seed: int = 0, size: int = 32, with_split: bool = True) -> str:
    """Write PNGs and ``manifest.csv`` under ``root``; returns the manifest path.

    Class 0 maps to ODIR token ``N`` and class 1 to ``C`` so the files work
    with a Cataract-vs-Normal binary task configuration.
    """
    os.makedirs(os.path.join(root, "images"), exist_ok=True)
    samples = []
    for k, (split, n) in enumerate((("train", n_train), ("val", n_val), ("test", n_test))):
        if not n:
            continue
        imgs, ys = make_images(n, seed * 1000 + k, size)
        for i, (img, y) in enumerate(zip(imgs, ys)):
            rel = f"images/{split}_{i:04d}.png"
            encode_png(img, os.path.join(root, rel))
            label = 3 if y == 1 else 0  # C / N
            samples.append(Sample(rel, "left" if i % 2 == 0 else "right", label, split if with_split else "unassigned"))
    path = os.path.join(root, "manifest.csv")
    write_manifest(Dataset(samples, root=str(root)), path, with_split=with_split)
    return path
