"""Exact t-SNE embedding of vertex coordinates onto a line."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from ..graph import Ordering, UCSGraph
from .base import Embedding1D, OrderingError

log = logging.getLogger(__name__)

PERPLEXITY_TOL = 1e-4
MAX_BISECTION_STEPS = 64
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class TsneParams:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float | None = None
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch: int = 250
    min_gain: float = 0.01
    seed: int = 0

    def as_dict(self) -> dict:
        return asdict(self)

    def resolved_learning_rate(self, n: int) -> float:
        """Explicit rate, else ``min(200, n / early_exaggeration)``.

        A fixed rate of 200 diverges on small 1-D problems.
        """
        if self.learning_rate is not None:
            return float(self.learning_rate)
        return min(200.0, n / self.early_exaggeration)


def squared_distances(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = np.zeros((len(x), len(x)))
    for k in range(x.shape[1]):
        diff = x[:, k, None] - x[None, :, k]
        d += diff * diff
    return d


def _row_stats(dshift: np.ndarray, self_mask: np.ndarray, beta: np.ndarray):
    """Perplexity (``exp`` of entropy in nats) of each row at precision ``beta``."""
    e = np.exp(-dshift * beta[:, None])
    e[self_mask] = 0.0
    s = e.sum(axis=1)
    weighted = np.where(self_mask, 0.0, dshift * e).sum(axis=1)
    h = np.log(s) + beta * weighted / s
    return np.exp(h), e, s


def conditional_probabilities(sqdist: np.ndarray, perplexity: float,
                              tol: float = PERPLEXITY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``p_{j|i}`` of Gaussian neighbor probabilities at a target perplexity.

    The precision of each row is found by bisection on its logarithm. Returns
    ``(P, achieved_perplexity)``; rows whose perplexity misses the target by
    more than ``tol`` are reported through the second array, not raised.
    """
    sqdist = np.asarray(sqdist, dtype=float)
    n = len(sqdist)
    P = np.zeros((n, n))
    achieved = np.zeros(n)
    chunk = max(1, _CHUNK_ELEMS // max(n, 1))
    for lo_row in range(0, n, chunk):
        rows = np.arange(lo_row, min(n, lo_row + chunk))
        d = sqdist[rows].copy()
        self_mask = np.zeros_like(d, dtype=bool)
        self_mask[np.arange(len(rows)), rows] = True
        d[self_mask] = np.inf
        dmin = d.min(axis=1)
        dshift = d - dmin[:, None]
        dshift[self_mask] = 0.0
        span = dshift.max(axis=1)
        gaps = np.where(self_mask | (dshift <= 0), np.inf, dshift).min(axis=1)
        span = np.where(span > 0, span, 1.0)
        gaps = np.where(np.isfinite(gaps), gaps, 1.0)
        lo = np.log(1e-8 / span)
        hi = np.log(1e3 / gaps)
        hi = np.maximum(hi, lo + 1.0)
        mid = 0.5 * (lo + hi)
        perp, e, s = _row_stats(dshift, self_mask, np.exp(mid))
        done = np.abs(perp - perplexity) <= tol
        for _ in range(MAX_BISECTION_STEPS):
            if done.all():
                break
            # perplexity decreases as precision grows
            too_flat = perp > perplexity
            lo = np.where(~done & too_flat, mid, lo)
            hi = np.where(~done & ~too_flat, mid, hi)
            new_mid = np.where(done, mid, 0.5 * (lo + hi))
            p2, e2, s2 = _row_stats(dshift, self_mask, np.exp(new_mid))
            upd = ~done
            perp = np.where(upd, p2, perp)
            e[upd] = e2[upd]
            s = np.where(upd, s2, s)
            mid = new_mid
            done = np.abs(perp - perplexity) <= tol
        P[rows] = e / s[:, None]
        achieved[rows] = perp
    return P, achieved


def joint_probabilities(P_cond: np.ndarray) -> np.ndarray:
    n = len(P_cond)
    return (P_cond + P_cond.T) / (2.0 * n)


@njit(cache=True)
def _student_t_sum(y):
    n = y.shape[0]
    z = 0.0
    for i in range(n):
        yi = y[i]
        for j in range(i + 1, n):
            d = yi - y[j]
            z += 1.0 / (1.0 + d * d)
    return 2.0 * z


@njit(cache=True)
def _gradient_1d(y, P, exag, grad):
    n = y.shape[0]
    z = _student_t_sum(y)
    for i in range(n):
        grad[i] = 0.0
    for i in range(n):
        yi = y[i]
        acc = 0.0
        for j in range(n):
            if j == i:
                continue
            d = yi - y[j]
            w = 1.0 / (1.0 + d * d)
            acc += (exag * P[i, j] - w / z) * w * d
        grad[i] = 4.0 * acc


@njit(cache=True)
def _kl_1d(P, y):
    n = y.shape[0]
    z = _student_t_sum(y)
    kl = 0.0
    for i in range(n):
        for j in range(n):
            p = P[i, j]
            if j == i or p <= 0.0:
                continue
            d = y[i] - y[j]
            q = max(1.0 / (1.0 + d * d) / z, 1e-300)
            kl += p * np.log(p / q)
    return kl


def kl_divergence(P: np.ndarray, y: np.ndarray) -> float:
    return float(_kl_1d(np.ascontiguousarray(P, dtype=float), np.ascontiguousarray(y, dtype=float)))


def tsne_layout_1d(P: np.ndarray, params: TsneParams, track_last: int = 100) -> tuple[np.ndarray, dict]:
    """Minimize KL(P || Q) over 1-D positions with a Student-t kernel.

    Gradient descent with per-coordinate adaptive gains, early exaggeration
    and a two-stage momentum schedule. ``info["kl_trace"]`` holds the KL
    divergence after each of the last ``track_last`` iterations.
    """
    n = len(P)
    P = np.ascontiguousarray(P, dtype=float)
    lr = params.resolved_learning_rate(n)
    rng = np.random.default_rng(params.seed)
    y = rng.normal(0.0, 1e-4, n)
    update = np.zeros(n)
    gains = np.ones(n)
    grad = np.zeros(n)
    kl_start = kl_divergence(P, y)
    trace = []
    for it in range(params.iterations):
        exag = params.early_exaggeration if it < params.exaggeration_iters else 1.0
        mom = params.momentum if it < params.momentum_switch else params.final_momentum
        _gradient_1d(y, P, exag, grad)
        if not np.all(np.isfinite(grad)):
            raise OrderingError(f"non-finite t-SNE gradient at iteration {it}")
        same = (grad > 0) == (update > 0)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, params.min_gain, out=gains)
        update = mom * update - lr * gains * grad
        y = y + update
        y -= y.mean()
        if it >= params.iterations - track_last:
            trace.append(kl_divergence(P, y))
    info = {"learning_rate": lr, "kl_start": kl_start, "kl_trace": trace, "kl_end": trace[-1] if trace else kl_divergence(P, y)}
    return y, info


def tsne_embed(coords: np.ndarray, params: TsneParams) -> Embedding1D:
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    if n < 4:
        raise OrderingError("t-SNE ordering needs n >= 4")
    if not 1.0 < params.perplexity < n:
        raise OrderingError(f"perplexity must lie in (1, {n}), got {params.perplexity}")
    if params.iterations < 1:
        raise OrderingError("iterations must be >= 1")
    P_cond, achieved = conditional_probabilities(squared_distances(coords), params.perplexity)
    if np.any(np.abs(achieved - params.perplexity) > PERPLEXITY_TOL):
        log.warning("perplexity bisection failed; retrying with 1e-9 m jitter")
        jitter = np.random.default_rng(params.seed).uniform(-1e-9, 1e-9, coords.shape)
        P_cond, achieved = conditional_probabilities(squared_distances(coords + jitter), params.perplexity)
        if np.any(np.abs(achieved - params.perplexity) > PERPLEXITY_TOL):
            worst = int(np.argmax(np.abs(achieved - params.perplexity)))
            raise OrderingError(
                f"perplexity {params.perplexity} unreachable at vertex {worst} (got {achieved[worst]:.6g})"
            )
    P = joint_probabilities(P_cond)
    y, info = tsne_layout_1d(P, params)
    info["achieved_perplexity"] = achieved
    return Embedding1D(y, info)


def tsne_order(g: UCSGraph, params: TsneParams = TsneParams()) -> tuple[Ordering, Embedding1D]:
    """Order vertices by a 1-D t-SNE embedding of their planar coordinates."""
    emb = tsne_embed(g.coords, params)
    return Ordering.from_values(emb.value, "tsne", params.as_dict()), emb
