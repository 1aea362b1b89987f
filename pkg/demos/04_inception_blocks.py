# %% [markdown]
# # Inception-family blocks as graph fragments
#
# Each block is a function that appends layers to a `GraphBuilder`. The
# `build_*` wrappers wrap one block in a standalone model so its shapes and
# parameter counts can be inspected in isolation.

# %%
import numpy as np

from diacnn.netgraph import (
    build_aux_classifier,
    build_inception_module,
    build_mini_inception,
    build_reduction,
    build_residual_inception_block,
    build_stem,
    forward,
    init_params,
)

fragments = {
    "inception module": build_inception_module(8, (4, 4, 4), 12),
    "residual-inception": build_residual_inception_block(12, (4, 4, 4)),
    "stem": build_stem(3, {"out_channels": 8, "kernel": 3}, {"out_channels": 8, "kernel": 5}),
    "reduction": build_reduction(8, (8, 8, 8), 16),
    "auxiliary head": build_aux_classifier(8, 2),
}
for name, spec in fragments.items():
    out = spec.outputs.get("out") or spec.outputs.get("logits")
    print(f"{name:20s} input {spec.input_shape} -> {spec.shapes[out]}, {len(spec.layers)} layers")

# %% The assembled network exposes main and auxiliary logits
model = build_mini_inception(num_classes=2)
params = init_params(model, seed=0)
res = forward(model, params, np.random.default_rng(0).uniform(size=(2, 3, 32, 32)).astype(np.float32))
print("logits", res.logits.data.shape, "aux", res.aux_logits.data.shape, "features", res.features.data.shape)
print("parameters:", params.count())
