import numpy as np
import pytest

import diacnn.trainer.loop as loop_mod
from diacnn.datapipe.loader import ArraySplits
from diacnn.datapipe.synthetic import make_splits
from diacnn.netgraph import build_diacnn, init_params, load_checkpoint, model_loss
from diacnn.trainer.config import EarlyStopConfig, PlateauConfig, TrainConfig
from diacnn.trainer.loop import DivergenceError, EpochRecord, Evaluation, History, evaluate, train_loop
from diacnn.trainer.optim import sgd_step
from diacnn.trainer.schedule import plateau_events, step_halving_lr


@pytest.fixture(scope="module")
def tiny():
    model = build_diacnn(4, 2, input_shape=(3, 16, 16))
    data = ArraySplits(make_splits(24, 8, 0, seed=3, size=16), batch_size=8, seed=1)
    return model, data


def scripted_evaluate(val_accs):
    """Replace validation with a fixed accuracy sequence."""
    it = iter(val_accs)

    def fake(model, params, batches):
        acc = next(it)
        return Evaluation(1.0 - acc, acc, np.zeros((1, 2)), np.zeros(1, dtype=np.int64), np.zeros((1, 1)))

    return fake


def test_history_csv_roundtrip():
    h = History([EpochRecord(1, 0.5, 0.75, 0.25, 1.0, 1e-3), EpochRecord(2, 0.1 + 0.2, 1 / 3, 0.0, 0.5, 5e-4)])
    text = h.to_csv()
    assert text.splitlines()[0] == "epoch,train_loss,train_acc,val_loss,val_acc,lr"
    back = History.from_csv(text)
    assert back.records == h.records
    assert back.to_csv() == text


def test_history_records_one_row_per_epoch(tiny):
    model, data = tiny
    cfg = TrainConfig(epochs=3, batch_size=8)
    res = train_loop(model, init_params(model, 0), data, cfg)
    assert [r.epoch for r in res.history.records] == [1, 2, 3]
    assert all(r.lr == 1e-3 for r in res.history.records)
    assert 1 <= res.best_epoch <= 3


def test_same_seed_gives_identical_history(tiny):
    model, data = tiny
    cfg = TrainConfig(epochs=2, batch_size=8)
    a = train_loop(model, init_params(model, 5), data, cfg)
    b = train_loop(model, init_params(model, 5), data, cfg)
    assert a.history.to_csv() == b.history.to_csv()
    assert a.params.checksum(include_buffers=True) == b.params.checksum(include_buffers=True)


def test_best_checkpoint_follows_monitor(tiny, tmp_path, monkeypatch):
    model, data = tiny
    snapshots = []
    monkeypatch.setattr(loop_mod, "evaluate", scripted_evaluate([0.6, 0.9, 0.7]))
    path = tmp_path / "best.ckpt"
    params = init_params(model, 0)
    res = train_loop(
        model, params, data, TrainConfig(epochs=3), checkpoint_path=path,
        on_epoch=lambda r: snapshots.append(params.checksum(include_buffers=True)),
    )
    assert res.best_epoch == 2 and res.history.best_epoch == 2
    assert res.best_params.checksum(include_buffers=True) == snapshots[1]
    ck = load_checkpoint(path)
    assert ck.params.checksum(include_buffers=True) == snapshots[1]


def test_ties_do_not_replace_best(tiny, monkeypatch):
    model, data = tiny
    monkeypatch.setattr(loop_mod, "evaluate", scripted_evaluate([0.75, 0.75, 0.5]))
    res = train_loop(model, init_params(model, 0), data, TrainConfig(epochs=3))
    assert res.best_epoch == 1


def test_initial_best_keeps_starting_point(tiny, tmp_path, monkeypatch):
    model, data = tiny
    monkeypatch.setattr(loop_mod, "evaluate", scripted_evaluate([0.5, 0.6]))
    params = init_params(model, 0)
    start = params.checksum(include_buffers=True)
    path = tmp_path / "best.ckpt"
    res = train_loop(model, params, data, TrainConfig(epochs=2), checkpoint_path=path, initial_best=0.9)
    assert res.best_epoch == 0
    assert res.best_params.checksum(include_buffers=True) == start
    assert load_checkpoint(path).params.checksum(include_buffers=True) == start
    assert params.checksum(include_buffers=True) != start


def test_plateau_and_schedule_compose_in_history(tiny, monkeypatch):
    model, data = tiny
    accs = [0.5, 0.5, 0.5, 0.75, 0.75, 0.75, 0.75]
    monkeypatch.setattr(loop_mod, "evaluate", scripted_evaluate(accs))
    cfg = TrainConfig(
        epochs=7, base_lr=1e-3, lr_schedule="step_halving", halving_period=3,
        plateau=PlateauConfig(True, 0.5, 2, 0.001),
    )
    res = train_loop(model, init_params(model, 0), data, cfg)
    # schedule first, then every plateau event seen so far
    fired = plateau_events(accs, 2, 0.001, "max")
    assert fired == [2, 5]
    want = [step_halving_lr(1e-3, e, 3) * 0.5 ** sum(f < e for f in fired) for e in range(7)]
    assert res.history.column("lr") == want


def test_early_stop_shortens_history(tiny, monkeypatch):
    model, data = tiny
    monkeypatch.setattr(loop_mod, "evaluate", scripted_evaluate([0.5, 0.6, 0.6, 0.6, 0.9, 0.9]))
    cfg = TrainConfig(epochs=6, early_stop=EarlyStopConfig(True, 2, 0.001))
    res = train_loop(model, init_params(model, 0), data, cfg)
    assert len(res.history) == 4


def test_vanishing_lr_leaves_parameters_unchanged(tiny):
    # base_lr must be positive; 1e-300 rounds every float32 update to zero
    model, data = tiny
    params = init_params(model, 0)
    before = params.checksum()
    train_loop(model, params, data, TrainConfig(optimizer="sgd", base_lr=1e-300, epochs=2))
    assert params.checksum() == before


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_on_nonfinite_parameters(tiny):
    model, data = tiny
    with pytest.raises(DivergenceError) as ei:
        train_loop(model, init_params(model, 0), data, TrainConfig(optimizer="sgd", base_lr=1e6, epochs=3))
    assert ei.value.epoch >= 1 and ei.value.batch >= 0
    assert "epoch" in str(ei.value)


def test_divergence_on_nonfinite_loss(tiny):
    model, _ = tiny
    arrays = make_splits(8, 4, 0, seed=1, size=16)
    x, y = arrays["train"]
    x = x.copy()
    x[0, 0, 0, 0] = np.nan
    data = ArraySplits({"train": (x, y), "val": arrays["val"]}, batch_size=8)
    with pytest.raises(DivergenceError, match="loss") as ei:
        train_loop(model, init_params(model, 0), data, TrainConfig(epochs=1))
    assert (ei.value.epoch, ei.value.batch) == (1, 0)


def test_empty_split_rejected(tiny):
    model, _ = tiny
    data = ArraySplits(make_splits(8, 0, 0, size=16))
    with pytest.raises(ValueError, match="nonempty"):
        train_loop(model, init_params(model, 0), data, TrainConfig(epochs=1))


def test_evaluate_reports_mean_nll_and_accuracy(tiny):
    model, data = tiny
    params = init_params(model, 2)
    ev = evaluate(model, params, data.batches("val", shuffle=False))
    p = ev.probs
    y = data.labels("val")
    assert ev.loss == pytest.approx(float(-np.log(p[np.arange(len(y)), y]).mean()), rel=1e-12)
    assert ev.acc == float((p.argmax(1) == y).mean())
    assert ev.features.shape == (len(y), 16)


def test_full_batch_sgd_descends():
    model = build_diacnn(8, 2)
    params = init_params(model, 0)
    x, y = make_splits(32, 0, 0, seed=4)["train"]
    losses = []
    for _ in range(20):
        params.zero_grad()
        loss, _ = model_loss(model, params, x, y, "train")
        loss.backward()
        sgd_step(params, None, 1e-3)
        losses.append(float(loss.data))
    assert all(b < a for a, b in zip(losses, losses[1:]))
