"""Graph execution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from diacnn import ops
from diacnn.netgraph.graph import ModelSpec
from diacnn.netgraph.params import ParamStore
from diacnn.tensor import Tensor


@dataclass
class ForwardResult:
    logits: Optional[Tensor]
    probs: Optional[Tensor]
    features: Optional[Tensor]
    aux_logits: Optional[Tensor] = None
    values: dict[str, Tensor] = field(default_factory=dict, repr=False)


def _bn_mode(params: ParamStore, layer_name: str, mode: str) -> str:
    # frozen BN layers always normalise with their running statistics
    if mode == "train" and not params.is_trainable(f"{layer_name}.gamma"):
        return "infer"
    return mode


def run_graph(model: ModelSpec, params: ParamStore, x, mode: str = "infer") -> dict[str, Tensor]:
    """Evaluate every layer; returns ``{layer name: output}`` including ``"input"``."""
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(x, Tensor):
        x = Tensor(np.asarray(x, dtype=params.dtype))
    elif x.dtype != params.dtype and not x.requires_grad:
        x = Tensor(x.data.astype(params.dtype))
    if x.data.ndim != 4 or tuple(x.shape[1:]) != model.input_shape:
        raise ValueError(f"batch shape {x.shape} does not match model input {model.input_shape}")
    vals: dict[str, Tensor] = {"input": x}
    for lyr in model.layers:
        ins = [vals[s] for s in lyr.inputs]
        a = lyr.attrs
        k = lyr.kind
        try:
            if k == "conv":
                b = params[f"{lyr.name}.bias"] if a.get("bias", True) else None
                out = ops.conv2d(ins[0], params[f"{lyr.name}.weight"], b, a.get("stride", 1), a.get("padding", "same"))
            elif k == "bn":
                out = ops.batch_norm(
                    ins[0],
                    params[f"{lyr.name}.gamma"],
                    params[f"{lyr.name}.beta"],
                    params.buffers[f"{lyr.name}.running_mean"],
                    params.buffers[f"{lyr.name}.running_var"],
                    mode=_bn_mode(params, lyr.name, mode),
                )
            elif k == "relu":
                out = ops.relu(ins[0])
            elif k == "maxpool":
                out = ops.maxpool2d(ins[0], a["window"], a.get("stride", a["window"]), a.get("padding", "valid"))
            elif k == "gap":
                out = ops.global_avg_pool(ins[0])
            elif k == "flatten":
                out = ops.flatten(ins[0])
            elif k == "fc":
                out = ops.fully_connected(ins[0], params[f"{lyr.name}.weight"], params[f"{lyr.name}.bias"])
            elif k == "add":
                out = ops.add(ins[0], ins[1])
            elif k == "concat":
                out = ops.concat_channels(ins)
            elif k == "softmax":
                out = ops.softmax(ins[0])
            else:
                raise ValueError(f"unknown layer kind {k!r}")
        except KeyError as exc:
            raise ValueError(f"{lyr.name}: uninitialized parameter {exc}") from None
        vals[lyr.name] = out
    return vals


def activation_pattern(model: ModelSpec, params: ParamStore, x, mode: str = "infer") -> dict[str, np.ndarray]:
    """Which piece of each piecewise-linear layer is active: ReLU sign masks and max-pool argmax.

    Two inputs (or parameter settings) with equal patterns lie in the same
    linear region of every ReLU and max-pool, which is what a finite
    difference needs in order to be meaningful.
    """
    vals = run_graph(model, params, x, mode)
    out = {}
    for lyr in model.layers:
        src = vals[lyr.inputs[0]].data if lyr.inputs else None
        if lyr.kind == "relu":
            out[lyr.name] = src > 0
        elif lyr.kind == "maxpool":
            a = lyr.attrs
            out[lyr.name] = ops.maxpool_argmax(src, a["window"], a.get("stride", a["window"]), a.get("padding", "valid"))
    return out


def forward(model: ModelSpec, params: ParamStore, batch, mode: str = "infer") -> ForwardResult:
    """Run the model and collect the logits, softmax probabilities and penultimate features."""
    vals = run_graph(model, params, batch, mode)
    outs = model.outputs
    logits = vals[outs["logits"]] if "logits" in outs else None
    return ForwardResult(
        logits=logits,
        probs=ops.softmax(logits) if logits is not None else None,
        features=vals[outs["features"]] if "features" in outs else None,
        aux_logits=vals[outs["aux_logits"]] if "aux_logits" in outs else None,
        values=vals,
    )


def model_loss(model: ModelSpec, params: ParamStore, x, labels, mode: str = "train") -> tuple[Tensor, ForwardResult]:
    """Cross-entropy on the main logits, plus the weighted auxiliary loss if the model has one."""
    res = forward(model, params, x, mode)
    loss = ops.softmax_cross_entropy(res.logits, labels)
    if res.aux_logits is not None:
        w = float(model.meta.get("aux_weight", 0.3))
        loss = ops.add(loss, ops.scale(ops.softmax_cross_entropy(res.aux_logits, labels), w))
    return loss, res
