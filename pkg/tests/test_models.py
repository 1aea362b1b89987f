import numpy as np
import pytest

from diacnn.netgraph import (
    Layer,
    ModelSpec,
    build_baseline_cnn,
    build_diacnn,
    build_mini_inception,
    build_model,
    count_trainable,
    forward,
    init_params,
    run_graph,
    validate_params,
)
from diacnn.tensor import Tensor


def diacnn_param_oracle(w: int, k: int) -> int:
    """Per-layer arithmetic for the ResNet-20 layout (bias-free convs, BN gamma/beta, FC with bias)."""
    def conv(cin, cout, ks):
        return cin * cout * ks * ks

    def bn(c):
        return 2 * c

    total = conv(3, w, 3) + bn(w)
    cin = w
    for mult in (1, 2, 4):
        c = w * mult
        for blk in range(3):
            total += conv(cin, c, 3) + bn(c) + conv(c, c, 3) + bn(c)
            if cin != c:
                total += conv(cin, c, 1) + bn(c)
            cin = c
    return total + cin * k + k


def baseline_param_oracle(k: int, hw: int = 224, fc=(256, 128, 64)) -> int:
    total, cin = 0, 3
    for c in (8, 16, 32, 64, 128):
        total += cin * c * 9 + 2 * c
        cin = c
    f = 128 * (hw // 32) ** 2
    for width in list(fc) + [k]:
        total += f * width + width
        f = width
    return total


DIACNN16_PARAMS = 271954  # pinned from diacnn_param_oracle(16, 2)


def test_param_oracle_pin():
    assert diacnn_param_oracle(16, 2) == DIACNN16_PARAMS


def test_diacnn16_param_count():
    m = build_diacnn(16, 2)
    assert count_trainable(m) == DIACNN16_PARAMS
    assert init_params(m).count() == DIACNN16_PARAMS


@pytest.mark.parametrize("width", [4, 8, 12, 16])
@pytest.mark.parametrize("k", [2, 8])
def test_diacnn_shapes_validate(width, k):
    m = build_diacnn(width, k)
    assert m.shapes["gap"] == (4 * width,)
    assert m.shapes["fc"] == (k,)
    assert m.shapes["s3b3.relu2"] == (4 * width, 8, 8)
    assert count_trainable(m) == diacnn_param_oracle(width, k)


def test_diacnn_weighted_layer_count():
    m = build_diacnn(16, 2)
    main_path = [l for l in m.weighted_layers() if not l.attrs.get("shortcut")]
    assert len(main_path) == 20
    assert sorted(l.name for l in m.weighted_layers() if l.attrs.get("shortcut")) == ["s2b1.proj", "s3b1.proj"]


def test_diacnn_forward_shapes():
    m = build_diacnn(16, 2)
    p = init_params(m, 0)
    x = np.random.default_rng(0).random((4, 3, 32, 32), dtype=np.float32)
    res = forward(m, p, x, "infer")
    assert res.logits.shape == (4, 2)
    assert res.features.shape == (4, 64)
    np.testing.assert_allclose(res.probs.data.sum(axis=1), 1.0, rtol=1e-6)


def test_infer_is_deterministic():
    m = build_diacnn(8, 2)
    p = init_params(m, 3)
    x = np.random.default_rng(1).random((3, 3, 32, 32), dtype=np.float32)
    a = forward(m, p, x, "infer").probs.data
    b = forward(m, p, x.copy(), "infer").probs.data
    assert a.tobytes() == b.tobytes()


def test_train_equals_infer_when_running_stats_match_batch():
    m = build_diacnn(4, 2)
    p = init_params(m, 0, dtype=np.float64)
    x = np.random.default_rng(2).random((6, 3, 32, 32))
    vals = run_graph(m, p.copy(), x, "train")
    for lyr in m.layers:
        if lyr.kind == "bn":
            h = vals[lyr.inputs[0]].data
            axes = (0, 2, 3) if h.ndim == 4 else (0,)
            p.buffers[f"{lyr.name}.running_mean"][...] = h.mean(axis=axes)
            p.buffers[f"{lyr.name}.running_var"][...] = h.var(axis=axes)
    train = forward(m, p.copy(), x, "train").logits.data
    infer = forward(m, p, x, "infer").logits.data
    np.testing.assert_allclose(train, infer, rtol=1e-9, atol=1e-12)


def test_forward_rejects_wrong_shape():
    m = build_diacnn(4, 2)
    with pytest.raises(ValueError, match="does not match"):
        forward(m, init_params(m), np.zeros((1, 3, 16, 16), dtype=np.float32))


def test_uninitialized_parameters():
    m = build_diacnn(4, 2)
    p = init_params(m)
    del p.params["fc.weight"]
    with pytest.raises(ValueError, match="uninitialized"):
        validate_params(m, p)
    with pytest.raises(ValueError, match="uninitialized"):
        forward(m, p, np.zeros((1, 3, 32, 32), dtype=np.float32))


@pytest.mark.parametrize("args", [(0, 2), (4, 1), (-1, 2)])
def test_diacnn_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        build_diacnn(*args)


def test_baseline_cnn():
    m = build_baseline_cnn(8)
    assert m.shapes["c5.pool"] == (128, 7, 7)
    assert count_trainable(m) == baseline_param_oracle(8)
    assert len([l for l in m.layers if l.kind == "fc"]) == 4
    small = build_baseline_cnn(2, (3, 64, 64))
    p = init_params(small, 0)
    res = forward(small, p, np.zeros((2, 3, 64, 64), dtype=np.float32))
    assert res.logits.shape == (2, 2)
    with pytest.raises(ValueError, match="too small"):
        build_baseline_cnn(2, (3, 16, 16))


def test_mini_inception_outputs():
    m = build_mini_inception(2)
    kinds = {l.kind for l in m.layers}
    assert {"conv", "bn", "relu", "maxpool", "concat", "add", "gap", "fc"} <= kinds
    p = init_params(m, 0)
    res = forward(m, p, np.zeros((2, 3, 32, 32), dtype=np.float32))
    assert res.logits.shape == (2, 2) and res.aux_logits.shape == (2, 2)


def test_build_model_presets():
    assert build_model("diacnn", 8, 12).shapes["fc"] == (8,)
    assert build_model("mini_inception").preset == "mini_inception"
    with pytest.raises(ValueError):
        build_model("vgg")


def test_graph_validation_errors():
    with pytest.raises(ValueError):
        ModelSpec((3, 8, 8), [Layer("c", "conv", ("input",), {"in_channels": 4, "out_channels": 2, "kernel": 3})], {"out": "c"})
    with pytest.raises(ValueError):
        ModelSpec((3, 8, 8), [Layer("r", "relu", ("input",)), Layer("r", "relu", ("r",))], {"out": "r"})
    with pytest.raises(ValueError):
        ModelSpec((3, 8, 8), [Layer("r", "relu", ("nowhere",))], {"out": "r"})


def test_spec_json_round_trip():
    m = build_mini_inception(2)
    again = ModelSpec.from_json(m.to_json())
    assert again == m
    assert again.shapes == m.shapes


def test_fully_frozen_eval_is_pure():
    m = build_diacnn(4, 2)
    p = init_params(m, 5)
    x = Tensor(np.random.default_rng(0).random((2, 3, 32, 32), dtype=np.float32))
    before = p.checksum(include_buffers=True)
    forward(m, p, x, "infer")
    assert p.checksum(include_buffers=True) == before
