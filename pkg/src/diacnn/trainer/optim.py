"""SGD and Adam updates that touch trainable parameters only."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from diacnn.netgraph.params import ParamStore


def _gradients(params: ParamStore, grads: Optional[Mapping[str, np.ndarray]]) -> dict[str, np.ndarray]:
    out = {}
    for name in params.trainable_names():
        g = params[name].grad if grads is None else grads.get(name)
        if g is None:
            raise ValueError(f"missing gradient for trainable parameter {name!r}")
        out[name] = g
    return out


def sgd_step(params: ParamStore, grads: Optional[Mapping[str, np.ndarray]] = None, lr: float = 0.01) -> ParamStore:
    """``p <- p - lr * g`` in place. ``grads`` defaults to each tensor's ``.grad``."""
    for name, g in _gradients(params, grads).items():
        p = params[name].data
        p -= (lr * g).astype(p.dtype, copy=False)
    return params


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: ParamStore,
    grads: Optional[Mapping[str, np.ndarray]] = None,
    state: Optional[AdamState] = None,
    lr: float = 1e-3,
    b1: float = 0.9,
    b2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ParamStore, AdamState]:
    """Bias-corrected Adam, in place.

    Moments for a parameter are created lazily (zeros) the first time it is
    trainable; frozen parameters are skipped and keep whatever moments they had.
    """
    state = AdamState() if state is None else state
    gs = _gradients(params, grads)
    state.t += 1
    t = state.t
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, g in gs.items():
        p = params[name].data
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        if m.shape != p.shape or v.shape != p.shape:
            raise ValueError(f"optimizer state for {name!r} has shape {m.shape}, parameter {p.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype, copy=False)
    return params, state
