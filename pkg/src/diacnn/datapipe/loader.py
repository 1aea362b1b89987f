"""Batch iteration over manifest datasets and in-memory arrays.

Both :class:`ImageSplits` and :class:`ArraySplits` expose
``batches(split, epoch)``, which is what the training loop consumes.
Training batches are shuffled with a seed derived from (seed, epoch); other
splits keep file order.
"""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from diacnn.datapipe.image import PreprocessConfig, decode_image, preprocess
from diacnn.datapipe.manifest import Dataset
from diacnn.datapipe.prng import XorShift64Star, derive_seed


def epoch_order(n: int, seed: int, epoch: int) -> list[int]:
    return XorShift64Star(derive_seed(seed, epoch)).permutation(n)


def batch_iter(
    ds: Dataset,
    split: str,
    batch_size: int,
    shuffle_seed: Optional[int],
    preprocess_cfg: PreprocessConfig,
    epoch: int = 0,
    train: Optional[bool] = None,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(N x C x H x W float32, labels int64)`` batches of one split.

    With ``shuffle_seed`` set the order is a seeded permutation (new per
    epoch); the last partial batch is emitted. Augmentation runs when
    ``train`` is true (default: ``split == "train"``), with a per-sample
    generator seeded from (preprocess seed, epoch, sample index) so results
    do not depend on batch composition.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    samples = ds.subset(split)
    if not samples:
        raise ValueError(f"split {split!r} is empty")
    train = (split == "train") if train is None else train
    order = list(range(len(samples))) if shuffle_seed is None else epoch_order(len(samples), shuffle_seed, epoch)
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        xs, ys = [], []
        for i in idx:
            s = samples[i]
            img = decode_image(ds.resolve(s))
            rng = XorShift64Star(derive_seed(preprocess_cfg.seed, epoch, i)) if train else None
            xs.append(preprocess(img, preprocess_cfg, rng))
            ys.append(s.label)
        yield np.stack(xs), np.asarray(ys, dtype=np.int64)


class ImageSplits:
    """Manifest-backed data source with optional decoded-image caching."""

    def __init__(self, ds: Dataset, preprocess_cfg: PreprocessConfig, batch_size: int = 64, seed: int = 0, augment: bool = True):
        self.ds = ds
        self.cfg = preprocess_cfg
        self.batch_size = batch_size
        self.seed = seed
        self.augment = augment

    def size(self, split: str) -> int:
        return len(self.ds.subset(split))

    def labels(self, split: str) -> np.ndarray:
        return np.asarray(self.ds.labels(split), dtype=np.int64)

    def batches(self, split: str, epoch: int = 0, shuffle: Optional[bool] = None):
        shuffle = (split == "train") if shuffle is None else shuffle
        return batch_iter(
            self.ds, split, self.batch_size, self.seed if shuffle else None, self.cfg, epoch,
            train=(split == "train" and self.augment and shuffle),
        )


class ArraySplits:
    """In-memory data source: ``{split: (x N x C x H x W, y)}``."""

    def __init__(self, arrays: dict[str, tuple[np.ndarray, np.ndarray]], batch_size: int = 64, seed: int = 0):
        self.arrays = {k: (np.asarray(x, dtype=np.float32), np.asarray(y, dtype=np.int64)) for k, (x, y) in arrays.items()}
        self.batch_size = batch_size
        self.seed = seed

    def size(self, split: str) -> int:
        return len(self.arrays[split][1]) if split in self.arrays else 0

    def labels(self, split: str) -> np.ndarray:
        return self.arrays[split][1]

    def batches(self, split: str, epoch: int = 0, shuffle: Optional[bool] = None):
        if self.size(split) == 0:
            raise ValueError(f"split {split!r} is empty")
        x, y = self.arrays[split]
        shuffle = (split == "train") if shuffle is None else shuffle
        order = np.asarray(epoch_order(len(y), self.seed, epoch) if shuffle else range(len(y)), dtype=np.int64)
        for start in range(0, len(order), self.batch_size):
            idx = order[start : start + self.batch_size]
            yield x[idx], y[idx]
