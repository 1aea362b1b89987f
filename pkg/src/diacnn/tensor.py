"""Tensor container and reverse-mode differentiation driver.

A :class:`Tensor` wraps a numpy array. Tensors produced by an op keep a
reference to their parents and a closure that maps the upstream gradient to
per-parent gradients. :func:`backward` walks that graph once, in reverse
topological order, and accumulates results into ``.grad``.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

DEFAULT_DTYPE = np.float32

_CHECK_FINITE = False


class GraphError(RuntimeError):
    """Raised for malformed autodiff graphs (non-scalar root, cycles)."""


def set_check_finite(flag: bool) -> None:
    """Enable or disable the post-op NaN/Inf check globally."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(flag)


@contextlib.contextmanager
def check_finite(flag: bool = True) -> Iterator[None]:
    """Context manager form of :func:`set_check_finite`."""
    global _CHECK_FINITE
    prev = _CHECK_FINITE
    _CHECK_FINITE = bool(flag)
    try:
        yield
    finally:
        _CHECK_FINITE = prev


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """n-dimensional array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE if dtype is None else dtype)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.op: str = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward_fn: BackwardFn,
        op: str,
    ) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out.op = op
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward_fn
        else:
            out._parents = ()
            out._backward = None
        if _CHECK_FINITE and not np.all(np.isfinite(data)):
            raise FloatingPointError(f"non-finite value produced by {op}")
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op}, requires_grad={self.requires_grad})"

    # operator sugar for the ops used in tests and losses
    def __add__(self, other: "Tensor") -> "Tensor":
        from diacnn import ops

        return ops.add(self, other)

    def __mul__(self, scalar: float) -> "Tensor":
        from diacnn import ops

        return ops.scale(self, scalar)

    __rmul__ = __mul__


def _topological_order(root: Tensor) -> list[Tensor]:
    # iterative DFS with three-colour marking so that cycles are reported
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Tensor, int]] = [(root, 0)]
    while stack:
        node, idx = stack.pop()
        key = id(node)
        if idx == 0:
            mark = state.get(key)
            if mark == 2:
                continue
            if mark == 1:
                raise GraphError("cyclic graph")
            state[key] = 1
        if idx < len(node._parents):
            stack.append((node, idx + 1))
            parent = node._parents[idx]
            pmark = state.get(id(parent))
            if pmark == 1:
                raise GraphError("cyclic graph")
            if pmark is None and parent.requires_grad:
                stack.append((parent, 0))
        else:
            state[key] = 2
            order.append(node)
    return order


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(t) into ``t.grad`` for every reachable tensor.

    ``root`` must hold exactly one element. Gradients add onto whatever is
    already stored, so calling this twice without zeroing doubles them.
    """
    if root.data.size != 1:
        raise GraphError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return
    order = _topological_order(root)
    pending: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + pg
            else:
                pending[key] = pg
