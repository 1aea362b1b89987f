"""Differentiable operations on NCHW tensors.

Every op takes and returns :class:`~diacnn.tensor.Tensor` and preserves the
floating dtype of its inputs. Convolution is cross-correlation (no kernel
flip) implemented with an im2col view and a single matrix product.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from diacnn.tensor import Tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _same_pad(k: int) -> int:
    if k % 2 == 0:
        raise ValueError(f"'same' padding needs an odd kernel, got {k}")
    return k // 2


# ---------------------------------------------------------------------------
# elementwise / structural
# ---------------------------------------------------------------------------


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ValueError(f"add: shape mismatch {x.shape} vs {y.shape}")
    return Tensor.from_op(x.data + y.data, (x, y), lambda g: (g, g), "add")


def scale(x: Tensor, c: float) -> Tensor:
    c_arr = np.asarray(c, dtype=x.dtype)
    return Tensor.from_op(x.data * c_arr, (x,), lambda g: (g * c_arr,), "scale")


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum(), dtype=x.dtype).reshape(())
    return Tensor.from_op(
        out, (x,), lambda g: (np.broadcast_to(g, x.shape).astype(x.dtype),), "sum"
    )


def mul(x: Tensor, y) -> Tensor:
    """Elementwise product; ``y`` may be a constant array (no gradient)."""
    if isinstance(y, Tensor):
        if x.shape != y.shape:
            raise ValueError(f"mul: shape mismatch {x.shape} vs {y.shape}")
        return Tensor.from_op(
            x.data * y.data, (x, y), lambda g: (g * y.data, g * x.data), "mul"
        )
    c = np.asarray(y, dtype=x.dtype)
    return Tensor.from_op(x.data * c, (x,), lambda g: (g * c,), "mul")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(
        np.maximum(x.data, 0).astype(x.dtype, copy=False),  # NaN propagates
        (x,),
        lambda g: (g * mask,),
        "relu",
    )


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    src = x.shape
    return Tensor.from_op(
        x.data.reshape(shape), (x,), lambda g: (g.reshape(src),), "reshape"
    )


def flatten(x: Tensor) -> Tensor:
    """N x ... -> N x prod(...)."""
    return reshape(x, (x.shape[0], -1))


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ValueError("concat_channels needs at least one part")
    n, _, h, w = parts[0].shape
    for p in parts:
        if p.data.ndim != 4 or (p.shape[0], p.shape[2], p.shape[3]) != (n, h, w):
            raise ValueError(
                f"concat_channels: spatial mismatch {p.shape} vs {parts[0].shape}"
            )
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def bw(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return Tensor.from_op(
        np.concatenate([p.data for p in parts], axis=1), tuple(parts), bw, "concat"
    )


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    def bw(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        return (full,)

    return Tensor.from_op(x.data[:, start:stop].copy(), (x,), bw, "slice")


# ---------------------------------------------------------------------------
# convolution and pooling
# ---------------------------------------------------------------------------


def _conv_out(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Optional[Tensor] = None,
    stride: int = 1,
    padding: str = "same",
) -> Tensor:
    """2-D cross-correlation.

    Args:
        x: input, N x InC x H x W.
        w: kernel, OutC x InC x Kh x Kw.
        b: optional bias of length OutC.
        stride: step in both spatial dimensions.
        padding: ``"same"`` (zero padding of k//2, odd kernels only) or
            ``"valid"``.
    """
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d expects 4-D input and kernel")
    n, c, h, wd = x.shape
    oc, ic, kh, kw = w.shape
    if c != ic:
        raise ValueError(f"conv2d: input has {c} channels, kernel expects {ic}")
    if stride < 1:
        raise ValueError("conv2d: stride must be >= 1")
    if b is not None and b.shape != (oc,):
        raise ValueError(f"conv2d: bias shape {b.shape} != ({oc},)")
    if padding == "same":
        ph, pw = _same_pad(kh), _same_pad(kw)
    elif padding == "valid":
        ph = pw = 0
    else:
        raise ValueError(f"unknown padding {padding!r}")
    ho = _conv_out(h, kh, stride, ph)
    wo = _conv_out(wd, kw, stride, pw)
    if ho < 1 or wo < 1:
        raise ValueError("conv2d: zero-sized spatial output")

    xp = x.data
    if ph or pw:
        xp = np.pad(xp, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    # N, C, Ho', Wo', kh, kw -> pick strided rows, reorder to N, Ho, Wo, C, kh, kw
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win[:, :, :ho, :wo]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * ho * wo, c * kh * kw
    )
    wmat = w.data.reshape(oc, -1)
    out = cols @ wmat.T
    if b is not None:
        out += b.data
    out = np.ascontiguousarray(out.reshape(n, ho, wo, oc).transpose(0, 3, 1, 2))

    parents = (x, w) if b is None else (x, w, b)

    def bw(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, oc)
        gw = (g2.T @ cols).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g2 @ wmat).reshape(n, ho, wo, c, kh, kw)
            gxp = np.zeros(xp.shape, dtype=x.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[
                        :,
                        :,
                        i : i + stride * (ho - 1) + 1 : stride,
                        j : j + stride * (wo - 1) + 1 : stride,
                    ] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = gxp[:, :, ph : ph + h, pw : pw + wd] if (ph or pw) else gxp
        if b is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return Tensor.from_op(out, parents, bw, "conv2d")


def _pool_pad(shape, window: int, padding: str) -> int:
    if padding == "same":
        pad = _same_pad(window)
    elif padding == "valid":
        pad = 0
    else:
        raise ValueError(f"unknown padding {padding!r}")
    h, w = shape[2:]
    if window > h + 2 * pad or window > w + 2 * pad:
        raise ValueError(f"maxpool2d: window {window} larger than input {h}x{w}")
    return pad


def _pool_windows(x: np.ndarray, window: int, stride: int, pad: int):
    """Padded input, flattened windows (N, C, Ho, Wo, window**2) and their argmax."""
    n, c, h, w = x.shape
    xp = x
    if pad:
        xp = np.pad(xp, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    ho = _conv_out(h, window, stride, pad)
    wo = _conv_out(w, window, stride, pad)
    win = sliding_window_view(xp, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win[:, :, :ho, :wo].reshape(n, c, ho, wo, window * window)
    return xp, win, win.argmax(axis=-1)


def maxpool_argmax(x: np.ndarray, window: int = 2, stride: int = 2, padding: str = "valid") -> np.ndarray:
    """Index (row-major within the window) of the element each output position selects."""
    return _pool_windows(x, window, stride, _pool_pad(x.shape, window, padding))[2]


def maxpool2d(x: Tensor, window: int = 2, stride: int = 2, padding: str = "valid") -> Tensor:
    """Windowed maximum. Gradient goes to the first maximum in row-major order."""
    n, c, h, w = x.shape
    pad = _pool_pad(x.shape, window, padding)
    xp, win, arg = _pool_windows(x.data, window, stride, pad)
    ho, wo = arg.shape[2:]
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        gxp = np.zeros(xp.shape, dtype=x.dtype)
        for i in range(window):
            for j in range(window):
                hit = arg == i * window + j
                gxp[
                    :,
                    :,
                    i : i + stride * (ho - 1) + 1 : stride,
                    j : j + stride * (wo - 1) + 1 : stride,
                ] += np.where(hit, g, 0)
        return (gxp[:, :, pad : pad + h, pad : pad + w] if pad else gxp,)

    return Tensor.from_op(np.ascontiguousarray(out), (x,), bw, "maxpool2d")


def avgpool2d(x: Tensor, window: int = 2, stride: int = 2) -> Tensor:
    """Windowed mean (valid padding). Not used by the shipped presets."""
    n, c, h, w = x.shape
    if window > h or window > w:
        raise ValueError(f"avgpool2d: window {window} larger than input {h}x{w}")
    ho = _conv_out(h, window, stride, 0)
    wo = _conv_out(w, window, stride, 0)
    win = sliding_window_view(x.data, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    out = win[:, :, :ho, :wo].mean(axis=(-2, -1))
    inv = 1.0 / (window * window)

    def bw(g):
        gx = np.zeros_like(x.data)
        share = (g * inv).astype(x.dtype)
        for i in range(window):
            for j in range(window):
                gx[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += share
        return (gx,)

    return Tensor.from_op(out.astype(x.dtype), (x,), bw, "avgpool2d")


def global_avg_pool(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    inv = np.asarray(1.0 / (h * w), dtype=x.dtype)

    def bw(g):
        return (np.broadcast_to((g * inv)[:, :, None, None], x.shape).copy(),)

    return Tensor.from_op(x.data.mean(axis=(2, 3)), (x,), bw, "global_avg_pool")


# ---------------------------------------------------------------------------
# normalisation and dense layers
# ---------------------------------------------------------------------------


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: str = "train",
    eps: float = BN_EPS,
    momentum: float = BN_MOMENTUM,
) -> Tensor:
    """Per-channel batch normalisation for N x C (x H x W) input.

    In ``train`` mode the batch mean and population variance are used and
    ``running_mean`` / ``running_var`` are updated in place as
    ``r <- momentum * r + (1 - momentum) * batch_stat``. In ``infer`` mode the
    running statistics are used and left untouched.
    """
    if x.data.ndim not in (2, 4):
        raise ValueError("batch_norm expects N x C or N x C x H x W input")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"batch_norm: gamma/beta must have length {c}")
    if x.shape[0] == 0:
        raise ValueError("batch_norm: zero batch size")
    axes = (0,) if x.data.ndim == 2 else (0, 2, 3)
    bshape = (1, c) if x.data.ndim == 2 else (1, c, 1, 1)
    dt = x.dtype

    if mode == "train":
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= momentum
        running_mean += (1 - momentum) * mean
        running_var *= momentum
        running_var += (1 - momentum) * var
    elif mode == "infer":
        mean = running_mean.astype(dt, copy=False)
        var = running_var.astype(dt, copy=False)
    else:
        raise ValueError(f"unknown batch_norm mode {mode!r}")

    inv_std = (1.0 / np.sqrt(var + eps)).astype(dt)
    xhat = (x.data - mean.reshape(bshape)) * inv_std.reshape(bshape)
    out = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)
    m = x.data.size // c

    def bw(g):
        gbeta = g.sum(axis=axes)
        ggamma = (g * xhat).sum(axis=axes)
        gxhat = g * gamma.data.reshape(bshape)
        if mode == "train":
            gx = (inv_std.reshape(bshape) / m) * (
                m * gxhat
                - gxhat.sum(axis=axes).reshape(bshape)
                - xhat * (gxhat * xhat).sum(axis=axes).reshape(bshape)
            )
        else:
            gx = gxhat * inv_std.reshape(bshape)
        return gx.astype(dt, copy=False), ggamma, gbeta

    return Tensor.from_op(out.astype(dt, copy=False), (x, gamma, beta), bw, "batch_norm")


def fully_connected(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """``x @ w + b`` with ``x`` N x F and ``w`` F x K."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"fully_connected: shape mismatch {x.shape} @ {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ValueError(f"fully_connected: bias shape {b.shape} != ({w.shape[1]},)")
    out = x.data @ w.data
    if b is not None:
        out = out + b.data

    def bw(g):
        gx = g @ w.data.T if x.requires_grad else None
        gw = x.data.T @ g if w.requires_grad else None
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=0)

    parents = (x, w) if b is None else (x, w, b)
    return Tensor.from_op(out, parents, bw, "fully_connected")


# ---------------------------------------------------------------------------
# classification heads
# ---------------------------------------------------------------------------


def _softmax_np(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    if x.data.ndim != 2 or x.shape[1] < 1:
        raise ValueError("softmax expects N x K input with K >= 1")
    p = _softmax_np(x.data)

    def bw(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return Tensor.from_op(p, (x,), bw, "softmax")


def _check_labels(labels, n: int, k: int) -> np.ndarray:
    lab = np.asarray(labels, dtype=np.int64).reshape(-1)
    if lab.shape[0] != n:
        raise ValueError(f"{lab.shape[0]} labels for {n} rows")
    if lab.size and (lab.min() < 0 or lab.max() >= k):
        raise ValueError(f"label out of range [0, {k})")
    return lab


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean negative log-probability of the true class."""
    n, k = probs.shape
    lab = _check_labels(labels, n, k)
    sums = probs.data.sum(axis=1)
    if np.any(np.abs(sums - 1) > 1e-5):
        raise ValueError("cross_entropy: rows of probs must sum to 1")
    picked = probs.data[np.arange(n), lab]
    loss = np.asarray(-np.log(picked).mean(), dtype=probs.dtype)

    def bw(g):
        gp = np.zeros_like(probs.data)
        gp[np.arange(n), lab] = -g / (n * picked)
        return (gp,)

    return Tensor.from_op(loss, (probs,), bw, "cross_entropy")


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Fused softmax + cross-entropy; gradient is ``(p - onehot) / N``."""
    n, k = logits.shape
    lab = _check_labels(labels, n, k)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = np.asarray((logsum - z[np.arange(n), lab]).mean(), dtype=logits.dtype)

    def bw(g):
        p = np.exp(z - logsum[:, None])
        p[np.arange(n), lab] -= 1
        return ((p * (g / n)).astype(logits.dtype, copy=False),)

    return Tensor.from_op(loss, (logits,), bw, "softmax_cross_entropy")
