import numpy as np
import pytest

from diacnn.datapipe.image import PreprocessConfig
from diacnn.datapipe.loader import ArraySplits, ImageSplits, batch_iter, epoch_order
from diacnn.datapipe.manifest import load_manifest
from diacnn.datapipe.synthetic import make_images, write_dataset

PLAIN = PreprocessConfig(resize_hw=(16, 16), equalize=False, blur_sigma=0.0)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    return load_manifest(write_dataset(root, 10, 3, 3, seed=2, size=16))


def test_batch_sizes_include_partial_tail(tiny_dataset):
    sizes = [len(y) for _, y in batch_iter(tiny_dataset, "train", 4, None, PLAIN)]
    assert sizes == [4, 4, 2]


def test_unshuffled_order_follows_manifest(tiny_dataset):
    ys = np.concatenate([y for _, y in batch_iter(tiny_dataset, "train", 4, None, PLAIN, train=False)])
    assert ys.tolist() == tiny_dataset.labels("train")


def test_pixels_match_decoded_files(tiny_dataset):
    x, _ = next(batch_iter(tiny_dataset, "train", 10, None, PLAIN, train=False))
    imgs, _ = make_images(10, 2 * 1000, 16)
    np.testing.assert_array_equal(x, imgs.transpose(0, 3, 1, 2).astype(np.float32) / np.float32(255))


def test_shuffle_is_seeded_per_epoch(tiny_dataset):
    def labels(seed, epoch):
        return [y.tolist() for _, y in batch_iter(tiny_dataset, "train", 4, seed, PLAIN, epoch, train=False)]

    assert labels(3, 0) == labels(3, 0)
    assert epoch_order(10, 3, 0) != epoch_order(10, 3, 1)
    assert sorted(epoch_order(10, 3, 1)) == list(range(10))


def test_augmented_batches_repeat_under_same_seed(tiny_dataset):
    splits = ImageSplits(tiny_dataset, PLAIN, batch_size=4, seed=1, augment=True)
    a = [x for x, _ in splits.batches("train", 2)]
    b = [x for x, _ in splits.batches("train", 2)]
    for xa, xb in zip(a, b):
        np.testing.assert_array_equal(xa, xb)


def test_augmentation_independent_of_batch_size(tiny_dataset):
    def by_index(batch_size):
        out = {}
        order = epoch_order(10, 1, 0)
        xs = np.concatenate([x for x, _ in batch_iter(tiny_dataset, "train", batch_size, 1, PLAIN, 0)])
        for pos, i in enumerate(order):
            out[i] = xs[pos]
        return out

    a, b = by_index(3), by_index(10)
    for i in range(10):
        np.testing.assert_array_equal(a[i], b[i])


def test_empty_split_raises(tmp_path):
    ds = load_manifest(write_dataset(tmp_path, 4, 0, 2, size=16))
    with pytest.raises(ValueError, match="empty"):
        next(batch_iter(ds, "val", 2, None, PLAIN))


def test_array_splits_batches(synthetic_splits):
    src = ArraySplits(synthetic_splits, batch_size=64, seed=0)
    sizes = [len(y) for _, y in src.batches("train", 0)]
    assert sizes == [64, 64, 64, 8]
    ys = np.concatenate([y for _, y in src.batches("val")])
    np.testing.assert_array_equal(ys, synthetic_splits["val"][1])
    shuffled = np.concatenate([y for _, y in src.batches("train", 0)])
    np.testing.assert_array_equal(np.sort(shuffled), np.sort(synthetic_splits["train"][1]))


def test_array_splits_missing_split():
    src = ArraySplits({"train": (np.zeros((2, 3, 4, 4)), np.zeros(2))})
    assert src.size("val") == 0
    with pytest.raises(ValueError):
        next(src.batches("val"))
