"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from diacnn.tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(1e-8, |a| + |n|), elementwise."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))


def numeric_grad(
    loss_fn: Callable[[], Tensor],
    target: Tensor,
    step: float = 1e-3,
    coords: Optional[Sequence[tuple]] = None,
) -> np.ndarray:
    """Central differences of ``loss_fn()`` w.r.t. entries of ``target.data``.

    ``loss_fn`` is re-evaluated with the entry perturbed in place, so it must
    read ``target`` afresh on every call. If ``coords`` is given only those
    entries are probed and a 1-D array in the same order is returned.
    """
    data = target.data
    idx_list = list(np.ndindex(data.shape)) if coords is None else list(coords)
    out = np.zeros(len(idx_list), dtype=np.float64)
    for k, idx in enumerate(idx_list):
        orig = data[idx]
        data[idx] = orig + step
        fp = float(loss_fn().data)
        data[idx] = orig - step
        fm = float(loss_fn().data)
        data[idx] = orig
        out[k] = (fp - fm) / (2 * step)
    return out.reshape(data.shape) if coords is None else out


def analytic_grads(loss_fn: Callable[[], Tensor], targets: Sequence[Tensor]) -> list[np.ndarray]:
    for t in targets:
        t.grad = None
    loss = loss_fn()
    loss.backward()
    return [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in targets]


def check_gradients(
    loss_fn: Callable[[], Tensor],
    targets: Sequence[Tensor],
    step: float = 1e-3,
    coords: Optional[dict[int, Sequence[tuple]]] = None,
) -> float:
    """Return the max relative error between backprop and central differences.

    Args:
        loss_fn: zero-argument callable building a scalar from ``targets``.
        targets: tensors (``requires_grad=True``) to differentiate against.
        step: finite-difference step.
        coords: optional map from target position to the entries to probe;
            targets not listed are probed exhaustively.
    """
    grads = analytic_grads(loss_fn, targets)
    worst = 0.0
    for i, (t, g) in enumerate(zip(targets, grads)):
        cs = None if coords is None else coords.get(i)
        num = numeric_grad(loss_fn, t, step, cs)
        ana = g if cs is None else np.array([g[c] for c in cs])
        if num.size:
            worst = max(worst, float(relative_error(ana, num).max()))
    return worst


def projection_loss(out: Tensor, weights: np.ndarray) -> Tensor:
    """``sum(out * weights)``; a generic scalar probe for non-scalar ops."""
    from diacnn import ops

    return ops.sum_all(ops.mul(out, weights))
