import numpy as np
import pytest

from diacnn.datapipe.loader import ArraySplits
from diacnn.netgraph import build_diacnn, build_mini_inception, init_params, set_trainable
from diacnn.trainer.config import TrainConfig
from diacnn.trainer.loop import train_loop


def test_head_only_selects_final_fc():
    m = build_diacnn(16, 2)
    p = set_trainable(init_params(m), "head_only", True, m)
    assert sorted(p.trainable_names()) == ["fc.bias", "fc.weight"]


def test_last_block_selects_block_and_head():
    m = build_diacnn(8, 2)
    p = set_trainable(init_params(m), "last_block", True, m)
    assert set(p.trainable_names()) == {k for k in p.names() if k.startswith(("s3b3.", "fc."))}


def test_prefix_list_and_all():
    m = build_diacnn(4, 2)
    p = init_params(m)
    set_trainable(p, "all", False)
    assert p.trainable_names() == []
    set_trainable(p, ["s1b1", "conv1"], True)
    assert set(p.trainable_names()) == {k for k in p.names() if k.startswith(("s1b1.", "conv1."))}
    # prefixes match whole name components only
    assert not any(k.startswith("s1b10") for k in p.trainable_names())


def test_selector_matching_nothing():
    m = build_diacnn(4, 2)
    with pytest.raises(ValueError, match="matches no parameter"):
        set_trainable(init_params(m), ["nope"], True)
    with pytest.raises(ValueError, match="needs the model"):
        set_trainable(init_params(m), "head_only", True)


def small_data(n=32, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 3, 32, 32), dtype=np.float32)
    y = (x[:, 0, :16].mean(axis=(1, 2)) > x[:, 0, 16:].mean(axis=(1, 2))).astype(np.int64)
    return ArraySplits({"train": (x, y), "val": (x[:8], y[:8])}, batch_size=16, seed=seed)


def test_all_frozen_is_bitwise_constant():
    m = build_diacnn(4, 2)
    p = set_trainable(init_params(m, 1), "all", False)
    before = p.checksum(include_buffers=True)
    train_loop(m, p, small_data(), TrainConfig(epochs=5, batch_size=16))
    assert p.checksum(include_buffers=True) == before


def test_head_only_training_decreases_loss(synthetic_splits):
    m = build_diacnn(8, 2)
    p = set_trainable(init_params(m, 0), "head_only", True, m)
    x, y = synthetic_splits["train"]
    data = ArraySplits({"train": (x[:96], y[:96]), "val": synthetic_splits["val"]}, batch_size=32, seed=0)
    backbone = [k for k in p.names() if not p.is_trainable(k)]
    before = p.checksum(backbone, include_buffers=True)
    res = train_loop(m, p, data, TrainConfig(epochs=10, batch_size=32, base_lr=3e-3))
    losses = res.history.column("train_loss")
    assert all(b < a for a, b in zip(losses, losses[1:])), losses
    assert p.checksum(backbone, include_buffers=True) == before


def test_mini_inception_head_preset():
    m = build_mini_inception(2)
    p = set_trainable(init_params(m), "head_only", True, m)
    assert sorted(p.trainable_names()) == ["fc.bias", "fc.weight"]
