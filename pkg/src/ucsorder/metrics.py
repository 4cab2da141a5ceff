"""Local ordering-quality measures.

Every measure yields one non-negative value per vertex; smaller is better.

* ``geo_fwd``  bounding-box diagonal of a rank window over that of the
  vertex's spatial nearest neighbors;
* ``geo_inv``  rank spread inside a distance ball divided by the ball size;
* ``topo_fwd`` largest hop distance from a vertex to its degree-sized rank
  window;
* ``topo_inv`` largest rank gap to a graph neighbor divided by the degree.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .graph import Ordering, UCSGraph, knn_spatial_many, shortest_hops

METRICS = ("geo_fwd", "geo_inv", "topo_fwd", "topo_inv")
BALL_MODES = ("graph", "euclidean")
MIN_OPT_DIAGONAL_M = 1.0
_CHUNK_ELEMS = 2_000_000


class MetricError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MetricSeries:
    metric: str
    values: np.ndarray
    params: Mapping[str, object] = field(default_factory=dict)
    ordering_ref: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not (np.all(np.isfinite(values)) and np.all(values >= 0)):
            raise MetricError(f"{self.metric}: values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class WindowSpec:
    m: int
    anchoring: str = "shift-to-fit"

    def __post_init__(self):
        if self.anchoring not in ("shift-to-fit", "truncate"):
            raise ValueError(f"unknown anchoring {self.anchoring!r}")
        if self.m < 1:
            raise ValueError("window size must be >= 1")


@dataclass(frozen=True)
class BoundingBox:
    lo: tuple[float, float]
    hi: tuple[float, float]

    @classmethod
    def of(cls, points: np.ndarray) -> "BoundingBox":
        points = np.asarray(points, dtype=float)
        return cls(tuple(points.min(axis=0).tolist()), tuple(points.max(axis=0).tolist()))

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]))


def _provenance(ordering: Ordering) -> dict:
    return {"method": ordering.method, "params": dict(ordering.params)}


def _run_chunks(n: int, fn: Callable[[np.ndarray], np.ndarray], jobs: int, chunk: int) -> np.ndarray:
    """Evaluate ``fn`` on consecutive index blocks and concatenate in order."""
    blocks = [np.arange(s, min(n, s + chunk)) for s in range(0, n, chunk)]
    if jobs <= 1 or len(blocks) <= 1:
        parts = [fn(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(fn, blocks))
    return np.concatenate(parts) if parts else np.empty(0)


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------

def adaptive_window_size(g: UCSGraph, v: int) -> int:
    """Degree rounded up to the next even number."""
    d = int(g.degree[v])
    return d if d % 2 == 0 else d + 1


def window_rank_range(k: int, n: int, spec: WindowSpec) -> tuple[int, int]:
    """Inclusive rank bounds of the size-``m`` window around rank ``k``."""
    m = min(spec.m, n)
    lo = k - m // 2
    hi = k + (m - m // 2) - 1
    if spec.anchoring == "shift-to-fit":
        lo = min(max(lo, 0), n - m)
        return lo, lo + m - 1
    return max(lo, 0), min(hi, n - 1)


def ordering_window(ordering: Ordering, v: int, spec: WindowSpec) -> np.ndarray:
    """Vertices whose ranks fall in the window centered on ``v``'s rank (``v`` included)."""
    lo, hi = window_rank_range(int(ordering.rank_of[v]), ordering.n, spec)
    return ordering.vertex_at[lo:hi + 1]


# ---------------------------------------------------------------------------
# Geometric measures
# ---------------------------------------------------------------------------

def _sliding_extrema(a: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Min and max of every length-``m`` run of ``a`` (``len(a) - m + 1`` runs)."""
    win = np.lib.stride_tricks.sliding_window_view(a, m)
    return win.min(axis=1), win.max(axis=1)


def geometric_forward(g: UCSGraph, ordering: Ordering, m: int, jobs: int = 1) -> MetricSeries:
    """Window bounding-box diagonal over the ``m``-nearest-neighbor diagonal."""
    n = g.n
    if not 2 <= m <= n:
        raise MetricError(f"window size m must be in [2, {n}], got {m}")
    pts = g.coords[ordering.vertex_at]
    xmin, xmax = _sliding_extrema(pts[:, 0], m)
    ymin, ymax = _sliding_extrema(pts[:, 1], m)
    start = np.clip(ordering.rank_of - m // 2, 0, n - m)
    raw = np.hypot(xmax[start] - xmin[start], ymax[start] - ymin[start])

    def opt_block(centers):
        nn = knn_spatial_many(g, centers, m)
        c = g.coords[nn]
        ext = c.max(axis=1) - c.min(axis=1)
        return np.hypot(ext[:, 0], ext[:, 1])

    opt = _run_chunks(n, opt_block, jobs, max(1, _CHUNK_ELEMS // m))
    values = raw / np.maximum(opt, MIN_OPT_DIAGONAL_M)
    return MetricSeries("geo_fwd", values, {"m": m, "anchoring": "shift-to-fit"}, _provenance(ordering))


def _spread_over_size(members: list[np.ndarray], rank_of: np.ndarray) -> np.ndarray:
    out = np.empty(len(members))
    for i, mem in enumerate(members):
        r = rank_of[mem]
        out[i] = (r.max() - r.min()) / len(mem)
    return out


def geometric_inverse(g: UCSGraph, ordering: Ordering, r: float, mode: str = "graph",
                      jobs: int = 1) -> MetricSeries:
    """Rank range of the radius-``r`` ball around each vertex over the ball size."""
    if r < 0:
        raise MetricError(f"radius must be non-negative, got {r}")
    if mode not in BALL_MODES:
        raise MetricError(f"unknown ball mode {mode!r}")
    n = g.n
    rank_of = ordering.rank_of.astype(float)

    if mode == "graph":
        def block(centers):
            dist = dijkstra(g.length_matrix, directed=False, indices=centers, limit=r)
            inside = dist <= r
            ranks = np.where(inside, rank_of[None, :], np.nan)
            spread = np.nanmax(ranks, axis=1) - np.nanmin(ranks, axis=1)
            return spread / inside.sum(axis=1)
        chunk = max(1, _CHUNK_ELEMS // n)
    else:
        def block(centers):
            cand = g.kdtree.query_ball_point(g.coords[centers], r * (1 + 1e-9) + 1e-9)
            members = []
            for c, idx in zip(centers, cand):
                idx = np.asarray(idx, dtype=np.int64)
                d = np.hypot(*(g.coords[idx] - g.coords[c]).T)
                members.append(idx[d <= r])
            return _spread_over_size(members, rank_of)
        chunk = 1024

    values = _run_chunks(n, block, jobs, chunk)
    return MetricSeries("geo_inv", values, {"r": r, "ball": mode}, _provenance(ordering))


# ---------------------------------------------------------------------------
# Topological measures
# ---------------------------------------------------------------------------

def topological_window(g: UCSGraph, ordering: Ordering, v: int) -> np.ndarray:
    """``m_i / 2`` vertices on each side of ``v`` in rank order, clipped at the ends."""
    m = adaptive_window_size(g, v)
    win = ordering_window(ordering, v, WindowSpec(m + 1, "truncate"))
    return win[win != v]


def topological_forward(g: UCSGraph, ordering: Ordering, jobs: int = 1) -> MetricSeries:
    """Largest hop count from each vertex to the members of its rank window."""

    def block(vs):
        out = np.zeros(len(vs))
        for i, v in enumerate(vs.tolist()):
            win = topological_window(g, ordering, v)
            if len(win):
                hops = shortest_hops(g, v, win.tolist())
                if len(hops) < len(win):
                    raise MetricError("graph is disconnected")
                out[i] = max(hops.values())
        return out

    values = _run_chunks(g.n, block, jobs, 256)
    return MetricSeries("topo_fwd", values, {"window": "adaptive", "anchoring": "truncate"},
                        _provenance(ordering))


def topological_inverse(g: UCSGraph, ordering: Ordering, jobs: int = 1) -> MetricSeries:
    """Largest rank gap to any graph neighbor, divided by the degree."""
    if g.n < 2:
        raise MetricError("topological inverse needs n >= 2")
    rows = np.repeat(np.arange(g.n), g.degree)
    gap = np.abs(ordering.rank_of[rows] - ordering.rank_of[g.indices])
    worst = np.zeros(g.n, dtype=np.int64)
    np.maximum.at(worst, rows, gap)
    deg = g.degree
    if np.any(deg == 0):
        raise MetricError("graph has isolated vertices")
    return MetricSeries("topo_inv", worst / deg, {}, _provenance(ordering))


def compute_metric(name: str, g: UCSGraph, ordering: Ordering, *, m: int | None = None,
                   r: float = 500.0, ball: str = "graph", jobs: int = 1) -> MetricSeries:
    if name == "geo_fwd":
        if m is None:
            raise MetricError("geo_fwd needs a window size m")
        return geometric_forward(g, ordering, m, jobs=jobs)
    if name == "geo_inv":
        return geometric_inverse(g, ordering, r, ball, jobs=jobs)
    if name == "topo_fwd":
        return topological_forward(g, ordering, jobs=jobs)
    if name == "topo_inv":
        return topological_inverse(g, ordering, jobs=jobs)
    raise MetricError(f"unknown metric {name!r}; expected one of {METRICS}")
