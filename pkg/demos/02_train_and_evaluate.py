# %% [markdown]
# # Training DiaCNN on the synthetic stand-in task
#
# Two classes of 32x32 colour images share noise statistics and differ only in
# a geometric pattern. A narrow DiaCNN learns them in a few epochs; then the
# evaluation kit produces the confusion matrix, ROC curve and a t-SNE map of
# the penultimate features.

# %%
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from diacnn.datapipe.loader import ArraySplits
from diacnn.datapipe.synthetic import make_splits
from diacnn.evalkit.confusion import confusion_matrix, metrics
from diacnn.evalkit.export import embedding_svg, roc_svg, training_curve_svg
from diacnn.evalkit.roc import auc, roc_curve
from diacnn.evalkit.tsne import tsne
from diacnn.netgraph import build_diacnn, init_params
from diacnn.trainer import TrainConfig, evaluate, train_loop

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

# %%
data = ArraySplits(make_splits(200, 50, 50, seed=0), batch_size=64, seed=0)
model = build_diacnn(net_width=8, num_classes=2)
cfg = TrainConfig(optimizer="adam", base_lr=1e-3, epochs=8)

with threadpool_limits(1):
    result = train_loop(model, init_params(model, 0), data, cfg, on_epoch=lambda r: print(
        f"epoch {r.epoch}: train acc {r.train_acc:.3f}, val acc {r.val_acc:.3f}, lr {r.lr:g}"))
    test = evaluate(model, result.best_params, data.batches("test", shuffle=False))

# %% Metrics on the held-out split
preds = test.probs.argmax(axis=1)
cm = confusion_matrix(preds, test.labels)
m = metrics(cm)
curve = roc_curve(test.probs[:, 1], test.labels)
print(cm)
print(f"sensitivity {m.sen:.1f}%, specificity {m.spec:.1f}%, accuracy {m.acc:.1f}%, AUC {auc(curve):.3f}")

# %% Figures
emb = tsne(test.features, perplexity=10, seed=0)
(out / "training_curve.svg").write_text(training_curve_svg(result.history))
(out / "roc.svg").write_text(roc_svg({1: curve}, ["Normal", "Cataract"]))
(out / "tsne.svg").write_text(embedding_svg(emb.coords, test.labels))
print("figures written to", out.resolve())
