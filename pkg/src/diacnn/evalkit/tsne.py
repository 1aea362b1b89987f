"""Exact (dense) t-SNE."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class PerplexityError(ValueError):
    """The requested perplexity cannot be reached for some point."""


@dataclass
class Embedding2D:
    coords: np.ndarray
    kl: float
    n_iter: int
    kl_trace: Optional[np.ndarray] = field(default=None, repr=False)


def squared_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _entropy(d_shift: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    p = np.exp(-d_shift * beta)
    s = p.sum()
    h = math.log(s) + beta * float(np.dot(d_shift, p)) / s
    return h, p / s


def conditional_probabilities(d: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 50) -> np.ndarray:
    """Row-wise Gaussian affinities whose entropy matches ``log(perplexity)``.

    The precision of each row is found by bisection (doubling / halving
    until bracketed) for at most ``max_iter`` steps. Raises
    :class:`PerplexityError` if the target lies outside the entropy range a
    row can attain, i.e. ``[log(#nearest ties), log(n - 1)]``.
    """
    n = d.shape[0]
    target = math.log(perplexity)
    out = np.zeros((n, n))
    for i in range(n):
        di = np.delete(d[i], i)
        dmin = di.min()
        shift = di - dmin
        ties = int(np.sum(shift <= 1e-12 * max(1.0, float(di.max()))))
        h_max, h_min = math.log(n - 1), math.log(ties)
        if target > h_max + tol or target < h_min - tol:
            raise PerplexityError(
                f"perplexity {perplexity} unreachable for point {i}: attainable range "
                f"[{math.exp(h_min):.6g}, {n - 1}]"
            )
        beta, lo, hi = 1.0, 0.0, math.inf
        h, p = _entropy(shift, beta)
        for _ in range(max_iter):
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if math.isinf(hi) else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
            h, p = _entropy(shift, beta)
        out[i, np.arange(n) != i] = p
    return out


def joint_probabilities(x: np.ndarray, perplexity: float) -> np.ndarray:
    cond = conditional_probabilities(squared_distances(np.asarray(x, dtype=np.float64)), perplexity)
    p = (cond + cond.T) / (2.0 * cond.shape[0])
    return np.maximum(p, 1e-12)


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), 1e-12)
    mask = ~np.eye(p.shape[0], dtype=bool)
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def tsne(
    features,
    perplexity: float = 30.0,
    iters: int = 1000,
    lr: float = 200.0,
    seed: int = 0,
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    momentum: tuple[float, float] = (0.5, 0.8),
    adaptive_gains: bool = True,
    record_kl: bool = False,
) -> Embedding2D:
    """Embed ``features`` (n x d) in two dimensions.

    Gradient descent with momentum ``momentum[0]`` during the first
    ``exaggeration_iters`` iterations (where P is multiplied by
    ``early_exaggeration``) and ``momentum[1]`` afterwards. With
    ``adaptive_gains`` the per-coordinate step sizes follow the usual
    delta-bar-delta rule (+0.2 on sign flip, x0.8 otherwise, floor 0.01).
    Velocity and gains are reset when the exaggeration stage ends.
    ``record_kl`` stores the KL divergence after every iteration.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        raise ValueError("t-SNE needs at least 4 points")
    p = joint_probabilities(x, perplexity)
    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    trace = np.zeros(iters) if record_kl else None
    for it in range(iters):
        if it == exaggeration_iters:
            # second stage starts from rest, as a separate descent run
            update[:] = 0.0
            gains[:] = 1.0
        exag = early_exaggeration if it < exaggeration_iters else 1.0
        mom = momentum[0] if it < exaggeration_iters else momentum[1]
        num = 1.0 / (1.0 + squared_distances(y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        w = (exag * p - q) * num
        grad = 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)
        if adaptive_gains:
            flip = np.sign(grad) != np.sign(update)
            gains = np.where(flip, gains + 0.2, gains * 0.8)
            np.maximum(gains, 0.01, out=gains)
            update = mom * update - lr * gains * grad
        else:
            update = mom * update - lr * grad
        y = y + update
        y = y - y.mean(axis=0)
        if record_kl:
            trace[it] = kl_divergence(p, y)
    return Embedding2D(y, kl_divergence(p, y), iters, trace)
