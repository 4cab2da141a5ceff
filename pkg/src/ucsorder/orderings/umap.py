"""1-D UMAP: fuzzy k-NN graph on vertex coordinates and a force-directed line layout."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.optimize import curve_fit
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..graph import Ordering, UCSGraph
from .base import Embedding1D, OrderingError
from .fiedler import laplacian_fiedler

log = logging.getLogger(__name__)

SIGMA_TOL = 1e-4
MAX_BISECTION_STEPS = 64


@dataclass(frozen=True)
class UmapParams:
    k: int = 15
    min_dist: float = 0.1
    spread: float = 1.0
    epochs: int = 200
    negative_sample_rate: int = 5
    repulsion_strength: float = 1.0
    seed: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def find_ab_params(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of ``1 / (1 + a x^(2b))`` to the offset exponential
    ``1 if x < min_dist else exp(-(x - min_dist) / spread)`` on ``[0, 3 spread]``."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0.0, 3.0 * spread, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    (a, b), _ = curve_fit(curve, xv, yv)
    return float(a), float(b)


def knn(coords: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``k`` nearest other points per row, sorted by (distance, index)."""
    n = len(coords)
    tree = cKDTree(coords)
    extra = min(n, k + 1 + 8)
    d, idx = tree.query(coords, k=extra)
    out_i = np.empty((n, k), dtype=np.int64)
    out_d = np.empty((n, k))
    for i in range(n):
        row_i, row_d = idx[i], d[i]
        if extra < n and row_d[-1] <= row_d[k]:
            # tie run reaches the end of the candidate list
            cand = np.asarray(tree.query_ball_point(coords[i], row_d[k] * (1 + 1e-9) + 1e-9), dtype=np.int64)
            row_i = cand
        row_i = row_i[row_i != i]
        dist = np.hypot(*(coords[row_i] - coords[i]).T)
        order = np.lexsort((row_i, dist))[:k]
        out_i[i], out_d[i] = row_i[order], dist[order]
    return out_i, out_d


def smooth_knn_sigmas(dists: np.ndarray, tol: float = SIGMA_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``(rho, sigma)`` with ``sum_j exp(-max(0, d_j - rho) / sigma) = log2(k)``.

    ``rho`` is the nearest-neighbor distance. When even ``sigma -> 0`` leaves
    the sum above the target (ties at ``rho``) the smallest bracket value is
    kept.
    """
    n, k = dists.shape
    target = math.log2(k)
    rho = dists[:, 0].copy()
    excess = np.maximum(0.0, dists - rho[:, None])
    scale = np.where(excess.max(axis=1) > 0, excess.max(axis=1), 1.0)
    pos = np.where(excess > 0, excess, np.inf).min(axis=1)
    pos = np.where(np.isfinite(pos), pos, 1.0)
    lo = np.log(pos / 1e3)
    hi = np.log(scale * 1e6)

    def total(log_sigma):
        return np.exp(-excess / np.exp(log_sigma)[:, None]).sum(axis=1)

    mid = 0.5 * (lo + hi)
    val = total(mid)
    for _ in range(MAX_BISECTION_STEPS):
        done = np.abs(val - target) <= tol
        if done.all():
            break
        over = val > target
        hi = np.where(~done & over, mid, hi)
        lo = np.where(~done & ~over, mid, lo)
        mid = np.where(done, mid, 0.5 * (lo + hi))
        val = total(mid)
    return rho, np.exp(mid)


def fuzzy_graph(coords: np.ndarray, k: int) -> sp.csr_matrix:
    """Symmetric membership strengths combined by ``a + b - a b``."""
    n = len(coords)
    idx, dists = knn(coords, k)
    rho, sigma = smooth_knn_sigmas(dists)
    w = np.exp(-np.maximum(0.0, dists - rho[:, None]) / sigma[:, None])
    rows = np.repeat(np.arange(n), k)
    # 1 - (1-a)(1-b) is the same t-conorm, but exactly symmetric and exact at a = 1
    key_a = rows * n + idx.ravel()
    key_b = idx.ravel() * n + rows
    keys = np.union1d(key_a, key_b)
    qa = np.ones(len(keys))
    qb = np.ones(len(keys))
    qa[np.searchsorted(keys, key_a)] = 1.0 - w.ravel()
    qb[np.searchsorted(keys, key_b)] = 1.0 - w.ravel()
    vals = 1.0 - qa * qb
    keep = vals >= np.finfo(float).tiny
    keys, vals = keys[keep], vals[keep]
    W = sp.csr_matrix((vals, (keys // n, keys % n)), shape=(n, n))
    W.sort_indices()
    return W


@njit(cache=True)
def _splitmix64(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _clip(v):
    if v > 4.0:
        return 4.0
    if v < -4.0:
        return -4.0
    return v


@njit(cache=True)
def _optimize_layout_1d(y, head, tail, epochs_per_sample, n_epochs, a, b, gamma, neg_rate, seed):
    n = y.shape[0]
    m = head.shape[0]
    eps_neg = epochs_per_sample / neg_rate
    next_sample = epochs_per_sample.copy()
    next_neg = eps_neg.copy()
    state = np.uint64(seed)
    for epoch in range(n_epochs):
        alpha = 1.0 - epoch / n_epochs
        for e in range(m):
            if next_sample[e] > epoch:
                continue
            j = head[e]
            k = tail[e]
            d = y[j] - y[k]
            d2 = d * d
            if d2 > 0.0:
                coeff = -2.0 * a * b * d2 ** (b - 1.0) / (a * d2 ** b + 1.0)
            else:
                coeff = 0.0
            g = _clip(coeff * d) * alpha
            y[j] += g
            y[k] -= g
            next_sample[e] += epochs_per_sample[e]
            n_neg = int((epoch - next_neg[e]) / eps_neg[e])
            for _ in range(n_neg):
                state, r = _splitmix64(state)
                k = int(r % np.uint64(n))
                if k == j:
                    continue
                d = y[j] - y[k]
                d2 = d * d
                if d2 > 0.0:
                    coeff = 2.0 * gamma * b / ((0.001 + d2) * (a * d2 ** b + 1.0))
                    g = _clip(coeff * d)
                else:
                    g = 4.0
                y[j] += g * alpha
            next_neg[e] += n_neg * eps_neg[e]
    return y


def spectral_init(W: sp.csr_matrix, seed: int) -> tuple[np.ndarray, str]:
    """Fiedler vector of the fuzzy graph scaled to [0, 10]; seeded noise on failure."""
    n = W.shape[0]
    ncomp, _ = connected_components(W, directed=False)
    v = None
    if ncomp == 1:
        deg = np.asarray(W.sum(axis=1)).ravel()
        L = sp.diags(deg) - W
        try:
            _, v, _ = laplacian_fiedler(L, seed=seed)
            how = "spectral"
        except (OrderingError, np.linalg.LinAlgError, RuntimeError) as exc:
            log.warning("spectral initialization failed (%s); using random", exc)
    if v is None:
        v = np.random.default_rng(seed).uniform(-10.0, 10.0, n)
        how = "random"
    span = np.ptp(v)
    y = 10.0 * (v - v.min()) / span if span > 0 else np.zeros(n)
    return y, how


def umap_embed(coords: np.ndarray, params: UmapParams) -> Embedding1D:
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    if not 2 <= params.k < n:
        raise OrderingError(f"k must satisfy 2 <= k < n={n}, got {params.k}")
    W = fuzzy_graph(coords, params.k)
    y, how = spectral_init(W, params.seed)
    a, b = find_ab_params(params.min_dist, params.spread)

    coo = W.tocoo()
    w = coo.data.copy()
    w[w < w.max() / params.epochs] = 0.0
    keep = w > 0
    head = coo.row[keep].astype(np.int64)
    tail = coo.col[keep].astype(np.int64)
    eps = w.max() / w[keep]
    y = _optimize_layout_1d(
        y.astype(float), head, tail, eps, int(params.epochs), a, b,
        float(params.repulsion_strength), float(params.negative_sample_rate), int(params.seed) & (2**64 - 1),
    )
    if not np.all(np.isfinite(y)):
        raise OrderingError("non-finite UMAP layout")
    return Embedding1D(y, {"a": a, "b": b, "init": how, "n_edges": int(keep.sum()) // 2})


def umap_order(g: UCSGraph, params: UmapParams = UmapParams()) -> tuple[Ordering, Embedding1D]:
    """Order vertices by a 1-D UMAP embedding of their planar coordinates."""
    emb = umap_embed(g.coords, params)
    return Ordering.from_values(emb.value, "umap", params.as_dict()), emb
