# %% [markdown]
# # Freezing a trained backbone
#
# Train a small DiaCNN, swap the class labels, re-initialise the classifier
# and update only the final dense layer. The backbone checksum must not move,
# yet the relabeled task is learned from the frozen features.

# %%
from threadpoolctl import threadpool_limits

from diacnn.datapipe.loader import ArraySplits
from diacnn.datapipe.synthetic import make_splits
from diacnn.netgraph import build_diacnn, init_params, set_trainable
from diacnn.trainer import TrainConfig, evaluate, train_loop

splits = make_splits(200, 50, 50, seed=0)
model = build_diacnn(net_width=8, num_classes=2)

with threadpool_limits(1):
    params = train_loop(model, init_params(model, 0), ArraySplits(splits, 64, seed=0), TrainConfig(epochs=5)).params

    swapped = ArraySplits({k: (x, 1 - y) for k, (x, y) in splits.items()}, 32, seed=1)
    fresh = init_params(model, 99)
    for name in ("fc.weight", "fc.bias"):
        params[name].data[...] = fresh[name].data
    set_trainable(params, "head_only", True, model)
    print("trainable:", params.trainable_names())

    backbone = [k for k in params.names() if not k.startswith("fc.")]
    before = params.checksum(backbone, include_buffers=True)
    loss0 = evaluate(model, params, swapped.batches("train", shuffle=False)).loss
    res = train_loop(model, params, swapped, TrainConfig(base_lr=3e-3, epochs=10, batch_size=32))
    loss1 = evaluate(model, res.params, swapped.batches("train", shuffle=False)).loss

# %%
print(f"train loss on swapped labels: {loss0:.4f} -> {loss1:.4f}")
print("backbone unchanged:", res.params.checksum(backbone, include_buffers=True) == before)
