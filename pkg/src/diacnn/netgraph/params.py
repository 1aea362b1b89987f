"""Named parameter arrays with trainable flags, plus batch-norm buffers."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from diacnn.netgraph.graph import Layer, ModelSpec
from diacnn.tensor import DEFAULT_DTYPE, Tensor


@dataclass
class Param:
    tensor: Tensor
    trainable: bool = True

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data


def param_shapes(layer: Layer) -> dict[str, tuple[int, ...]]:
    """Parameters a layer requires, keyed by kind (``weight``, ``bias``, ...)."""
    a = layer.attrs
    if layer.kind == "conv":
        out = {"weight": (a["out_channels"], a["in_channels"], a["kernel"], a["kernel"])}
        if a.get("bias", True):
            out["bias"] = (a["out_channels"],)
        return out
    if layer.kind == "bn":
        return {"gamma": (a["channels"],), "beta": (a["channels"],)}
    if layer.kind == "fc":
        return {"weight": (a["in_features"], a["out_features"]), "bias": (a["out_features"],)}
    return {}


def buffer_shapes(layer: Layer) -> dict[str, tuple[int, ...]]:
    if layer.kind == "bn":
        c = layer.attrs["channels"]
        return {"running_mean": (c,), "running_var": (c,)}
    return {}


class ParamStore:
    """Mapping ``"<layer>.<kind>" -> Param`` and ``"<layer>.<stat>" -> ndarray``."""

    def __init__(self, params: Optional[dict[str, Param]] = None, buffers: Optional[dict[str, np.ndarray]] = None):
        self.params: dict[str, Param] = dict(params or {})
        self.buffers: dict[str, np.ndarray] = dict(buffers or {})

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name].tensor

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    @property
    def dtype(self):
        for p in self.params.values():
            return p.data.dtype
        return np.dtype(DEFAULT_DTYPE)

    def names(self) -> list[str]:
        return list(self.params)

    def trainable_names(self) -> list[str]:
        return [k for k, p in self.params.items() if p.trainable]

    def is_trainable(self, name: str) -> bool:
        return self.params[name].trainable

    def count(self, trainable_only: bool = False) -> int:
        return int(sum(p.data.size for p in self.params.values() if p.trainable or not trainable_only))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.tensor.grad = None

    def copy(self) -> "ParamStore":
        return ParamStore(
            {k: Param(Tensor(p.data.copy(), requires_grad=True), p.trainable) for k, p in self.params.items()},
            {k: v.copy() for k, v in self.buffers.items()},
        )

    def astype(self, dtype) -> "ParamStore":
        return ParamStore(
            {k: Param(Tensor(p.data.astype(dtype), requires_grad=True), p.trainable) for k, p in self.params.items()},
            {k: v.astype(dtype) for k, v in self.buffers.items()},
        )

    def checksum(self, names: Optional[Iterable[str]] = None, include_buffers: bool = False) -> str:
        """SHA-256 over names, shapes and raw bytes, in sorted name order."""
        h = hashlib.sha256()
        chosen = sorted(self.params if names is None else names)
        for k in chosen:
            arr = np.ascontiguousarray(self.params[k].data)
            h.update(k.encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        if include_buffers:
            for k in sorted(self.buffers):
                h.update(k.encode())
                h.update(np.ascontiguousarray(self.buffers[k]).tobytes())
        return h.hexdigest()


def init_params(model: ModelSpec, seed: int = 0, dtype=DEFAULT_DTYPE) -> ParamStore:
    """Kaiming-normal conv/fc weights, zero biases, BN gamma=1 / beta=0."""
    rng = np.random.default_rng(seed)
    params: dict[str, Param] = {}
    buffers: dict[str, np.ndarray] = {}
    for lyr in model.layers:
        for kind, shape in param_shapes(lyr).items():
            if kind == "weight":
                fan_in = int(np.prod(shape[1:])) if lyr.kind == "conv" else shape[0]
                arr = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
            elif kind == "gamma":
                arr = np.ones(shape)
            else:
                arr = np.zeros(shape)
            params[f"{lyr.name}.{kind}"] = Param(Tensor(arr.astype(dtype), requires_grad=True))
        for kind, shape in buffer_shapes(lyr).items():
            fill = np.ones if kind == "running_var" else np.zeros
            buffers[f"{lyr.name}.{kind}"] = fill(shape, dtype=dtype)
    return ParamStore(params, buffers)


def validate_params(model: ModelSpec, store: ParamStore) -> None:
    """Raise ``ValueError`` unless ``store`` holds exactly the model's parameters."""
    expected: dict[str, tuple[int, ...]] = {}
    for lyr in model.layers:
        for kind, shape in param_shapes(lyr).items():
            expected[f"{lyr.name}.{kind}"] = shape
    missing = sorted(set(expected) - set(store.params))
    extra = sorted(set(store.params) - set(expected))
    if missing:
        raise ValueError(f"uninitialized parameters: {missing[:5]}")
    if extra:
        raise ValueError(f"unexpected parameters: {extra[:5]}")
    for k, shape in expected.items():
        if store.params[k].data.shape != shape:
            raise ValueError(f"{k}: shape {store.params[k].data.shape} != {shape}")


def count_trainable(model: ModelSpec) -> int:
    return int(sum(np.prod(s) for lyr in model.layers for s in param_shapes(lyr).values()))
