"""Undirected connected spatial graphs: ingestion, projection and queries.

Vertices carry planar coordinates in meters (local equirectangular
projection about the centroid) plus the latitude/longitude they were read
with. Vertex indices follow order of appearance in the source file, so the
"original" ordering of a graph is simply ``range(n)``.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import json
import logging
import math
import xml.etree.ElementTree as ET
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6371008.8
FORMATS = ("osm-xml", "csv-pair")


class IngestError(ValueError):
    """Raised when a graph file cannot be turned into a valid UCS graph."""


# ---------------------------------------------------------------------------
# Geodesy
# ---------------------------------------------------------------------------

def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters between points given in degrees."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def project_local(raw: np.ndarray, origin: tuple[float, float] | None = None) -> np.ndarray:
    """Equirectangular projection of ``(lat, lon)`` rows to meters.

    ``origin`` defaults to the centroid of ``raw``.
    """
    raw = np.asarray(raw, dtype=float)
    if origin is None:
        origin = (float(raw[:, 0].mean()), float(raw[:, 1].mean()))
    lat0, lon0 = origin
    x = EARTH_RADIUS_M * np.radians(raw[:, 1] - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_M * np.radians(raw[:, 0] - lat0)
    return np.column_stack([x, y])


def unproject_local(xy: np.ndarray, origin: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    xy = np.asarray(xy, dtype=float)
    lat0, lon0 = origin
    lat = lat0 + np.degrees(xy[:, 1] / EARTH_RADIUS_M)
    lon = lon0 + np.degrees(xy[:, 0] / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return np.column_stack([lat, lon])


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------

def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class UCSGraph:
    """Immutable simple undirected graph with planar vertex positions.

    Adjacency is stored in CSR form (``indptr``, ``indices``, ``lengths``);
    neighbor lists are sorted by vertex index.
    """

    vertex_ids: tuple[str, ...]
    coords: np.ndarray
    raw_coords: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    lengths: np.ndarray
    meta: Mapping[str, object] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.vertex_ids)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    @cached_property
    def degree(self) -> np.ndarray:
        return _frozen(np.diff(self.indptr))

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_lengths(self, i: int) -> np.ndarray:
        return self.lengths[self.indptr[i]:self.indptr[i + 1]]

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        out = []
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out.append(tuple(zip(self.indices[lo:hi].tolist(), self.lengths[lo:hi].tolist())))
        return tuple(out)

    @cached_property
    def _adj_lists(self) -> list[list[int]]:
        ip, ix = self.indptr.tolist(), self.indices.tolist()
        return [ix[ip[i]:ip[i + 1]] for i in range(self.n)]

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Each undirected edge once as ``(u, v, length)`` with ``u < v``."""
        rows = np.repeat(np.arange(self.n), self.degree)
        keep = rows < self.indices
        return rows[keep], self.indices[keep], self.lengths[keep]

    @cached_property
    def length_matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.lengths, self.indices, self.indptr), shape=(self.n, self.n))

    @cached_property
    def kdtree(self) -> cKDTree:
        return cKDTree(self.coords)

    def index_of(self, vertex_id: str) -> int:
        return self._id_index[vertex_id]

    @cached_property
    def _id_index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertex_ids)}

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        ncomp, _ = connected_components(self.length_matrix, directed=False)
        return ncomp == 1


@dataclass(frozen=True, eq=False)
class Ordering:
    """Bijection from vertex index to a 0-based rank.

    Files and reports use 1-based ranks; see :mod:`ucsorder.io`.
    """

    rank_of: np.ndarray
    method: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        rank_of = np.asarray(self.rank_of, dtype=np.int64)
        n = len(rank_of)
        if not np.array_equal(np.sort(rank_of), np.arange(n)):
            raise ValueError("rank_of is not a permutation of 0..n-1")
        object.__setattr__(self, "rank_of", _frozen(rank_of))

    @property
    def n(self) -> int:
        return len(self.rank_of)

    @cached_property
    def vertex_at(self) -> np.ndarray:
        """Inverse permutation: ``vertex_at[k]`` is the vertex with rank ``k``."""
        inv = np.empty_like(self.rank_of)
        inv[self.rank_of] = np.arange(self.n)
        return _frozen(inv)

    def reversed(self) -> "Ordering":
        return Ordering(self.n - 1 - self.rank_of, self.method, dict(self.params, reversed=True))

    @classmethod
    def from_values(cls, values, method: str, params: Mapping[str, object] | None = None) -> "Ordering":
        """Rank by ascending value, ties by ascending vertex index."""
        values = np.asarray(values, dtype=float)
        order = np.lexsort((np.arange(len(values)), values))
        rank_of = np.empty(len(values), dtype=np.int64)
        rank_of[order] = np.arange(len(values))
        return cls(rank_of, method, dict(params or {}))


def build_graph(
    vertex_ids: Sequence[str],
    raw_coords,
    edges: Iterable[tuple[int, int, float | None]],
    coords=None,
    meta: Mapping[str, object] | None = None,
) -> UCSGraph:
    """Assemble a simple graph from index-based edges.

    Self-loops are dropped and parallel edges collapse to the shortest one.
    A length of ``None`` means haversine distance between the endpoints when
    ``coords`` is not given, planar distance otherwise. Connectivity is not
    enforced here; see :func:`largest_component`.
    """
    n = len(vertex_ids)
    if n == 0:
        raise IngestError("graph has no vertices")
    if len(set(vertex_ids)) != n:
        raise IngestError("duplicate vertex ids")
    raw = np.asarray(raw_coords, dtype=float).reshape(n, 2)
    if not np.all(np.isfinite(raw)):
        bad = int(np.flatnonzero(~np.isfinite(raw).all(axis=1))[0])
        raise IngestError(f"non-finite coordinate for vertex {vertex_ids[bad]!r}")
    planar = project_local(raw) if coords is None else np.asarray(coords, dtype=float).reshape(n, 2)
    if not np.all(np.isfinite(planar)):
        raise IngestError("non-finite planar coordinate")

    best: dict[tuple[int, int], float] = {}
    for u, v, length in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise IngestError(f"edge ({u}, {v}) references a missing vertex")
        if u == v:
            continue
        a, b = (u, v) if u < v else (v, u)
        if length is None:
            if coords is None:
                length = float(haversine_m(raw[a, 0], raw[a, 1], raw[b, 0], raw[b, 1]))
            else:
                length = float(math.hypot(*(planar[a] - planar[b])))
        length = float(length)
        if not math.isfinite(length) or length <= 0.0:
            raise IngestError(
                f"edge ({vertex_ids[a]!r}, {vertex_ids[b]!r}) has non-positive or non-finite length {length}"
            )
        prev = best.get((a, b))
        if prev is None or length < prev:
            best[(a, b)] = length

    if best:
        keys = np.array(list(best.keys()), dtype=np.int64)
        vals = np.array(list(best.values()), dtype=float)
    else:
        keys = np.empty((0, 2), dtype=np.int64)
        vals = np.empty(0)
    rows = np.concatenate([keys[:, 0], keys[:, 1]])
    cols = np.concatenate([keys[:, 1], keys[:, 0]])
    lens = np.concatenate([vals, vals])
    order = np.lexsort((cols, rows))
    rows, cols, lens = rows[order], cols[order], lens[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return UCSGraph(
        vertex_ids=tuple(str(v) for v in vertex_ids),
        coords=_frozen(planar.copy()),
        raw_coords=_frozen(raw.copy()),
        indptr=_frozen(indptr),
        indices=_frozen(cols.astype(np.int64)),
        lengths=_frozen(lens),
        meta=dict(meta or {}),
    )


def graph_from_planar(coords, edges, vertex_ids: Sequence[str] | None = None) -> UCSGraph:
    """Build a graph directly from planar coordinates in meters.

    Latitude/longitude are recovered by inverting the projection about
    (0°, 0°). ``edges`` items are ``(u, v)`` or ``(u, v, length)``.
    """
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    if vertex_ids is None:
        vertex_ids = [str(i) for i in range(n)]
    triples = [(e[0], e[1], e[2] if len(e) > 2 else None) for e in edges]
    return build_graph(vertex_ids, unproject_local(coords), triples, coords=coords)


def subgraph(g: UCSGraph, keep: Sequence[int], reproject: bool = True) -> UCSGraph:
    """Induced subgraph on ``keep`` (kept in ascending index order)."""
    keep = np.sort(np.asarray(keep, dtype=np.int64))
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    u, v, l = g.edges()
    mask = (remap[u] >= 0) & (remap[v] >= 0)
    raw = g.raw_coords[keep]
    coords = None if reproject else g.coords[keep]
    return build_graph(
        [g.vertex_ids[i] for i in keep],
        raw,
        zip(remap[u[mask]].tolist(), remap[v[mask]].tolist(), l[mask].tolist()),
        coords=coords,
        meta=g.meta,
    )


def largest_component(g: UCSGraph, reproject: bool = True) -> UCSGraph:
    """Restrict to the largest connected component (lowest index wins ties)."""
    if g.n <= 1:
        return g
    ncomp, labels = connected_components(g.length_matrix, directed=False)
    if ncomp == 1:
        return g
    sizes = np.bincount(labels)
    # labels are assigned in order of first vertex, so argmax picks the earliest
    keep = np.flatnonzero(labels == int(np.argmax(sizes)))
    log.info("kept largest component: %d of %d vertices (%d components)", len(keep), g.n, ncomp)
    return subgraph(g, keep, reproject=reproject)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise IngestError(f"cannot parse {what}: {text!r}") from None


def _read_osm_xml(path: Path):
    node_pos: dict[str, tuple[float, float]] = {}
    node_order: list[str] = []
    ways: list[list[str]] = []
    try:
        for _, elem in ET.iterparse(str(path), events=("end",)):
            if elem.tag == "node":
                nid = elem.get("id")
                if nid is None or elem.get("lat") is None or elem.get("lon") is None:
                    raise IngestError("<node> without id/lat/lon")
                if nid not in node_pos:
                    node_order.append(nid)
                node_pos[nid] = (_parse_float(elem.get("lat"), "lat"), _parse_float(elem.get("lon"), "lon"))
                elem.clear()
            elif elem.tag == "way":
                if any(t.get("k") == "highway" for t in elem.iter("tag")):
                    ways.append([nd.get("ref") for nd in elem.iter("nd")])
                elem.clear()
    except ET.ParseError as exc:
        raise IngestError(f"malformed OSM XML: {exc}") from None

    pairs = []
    used: set[str] = set()
    missing = 0
    for refs in ways:
        for a, b in zip(refs, refs[1:]):
            if a not in node_pos or b not in node_pos:
                missing += 1
                continue
            pairs.append((a, b))
            used.update((a, b))
    if missing:
        log.warning("skipped %d way segments referencing absent nodes", missing)
    ids = [nid for nid in node_order if nid in used]
    index = {nid: i for i, nid in enumerate(ids)}
    raw = [node_pos[nid] for nid in ids]
    edges = [(index[a], index[b], None) for a, b in pairs]
    return ids, raw, edges


def _csv_pair_paths(path: Path) -> tuple[Path, Path]:
    if path.is_dir():
        return path / "nodes.csv", path / "edges.csv"
    return path, path.with_name("edges.csv")


def _read_csv_pair(path: Path):
    nodes_path, edges_path = _csv_pair_paths(path)
    for p in (nodes_path, edges_path):
        if not p.exists():
            raise IngestError(f"missing file {p}")
    ids: list[str] = []
    raw: list[tuple[float, float]] = []
    with open(nodes_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "lat", "lon"} <= set(reader.fieldnames):
            raise IngestError(f"{nodes_path.name}: header must contain id,lat,lon")
        for row in reader:
            ids.append(row["id"])
            raw.append((_parse_float(row["lat"], "lat"), _parse_float(row["lon"], "lon")))
    index = {nid: i for i, nid in enumerate(ids)}
    if len(index) != len(ids):
        raise IngestError(f"{nodes_path.name}: duplicate node id")
    edges = []
    with open(edges_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"u", "v"} <= set(reader.fieldnames):
            raise IngestError(f"{edges_path.name}: header must contain u,v[,length_m]")
        for row in reader:
            try:
                u, v = index[row["u"]], index[row["v"]]
            except KeyError as exc:
                raise IngestError(f"{edges_path.name}: unknown node id {exc.args[0]!r}") from None
            text = (row.get("length_m") or "").strip()
            edges.append((u, v, _parse_float(text, "length_m") if text else None))
    return ids, raw, edges


def load_graph(path, format: str = "csv-pair") -> UCSGraph:
    """Read a street graph and reduce it to its largest connected component.

    ``format`` is ``"osm-xml"`` or ``"csv-pair"``; for the latter ``path``
    is the directory holding ``nodes.csv``/``edges.csv`` or the nodes file.
    """
    path = Path(path)
    if format not in FORMATS:
        raise IngestError(f"unknown format {format!r}; expected one of {FORMATS}")
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    if format == "osm-xml":
        ids, raw, edges = _read_osm_xml(path)
    else:
        ids, raw, edges = _read_csv_pair(path)
    if not ids:
        raise IngestError(f"{path}: no usable vertices")
    g = build_graph(ids, raw, edges, meta={"source": str(path), "format": format})
    # reprojects about the centroid of the kept component
    g = largest_component(g)
    if g.n_edges == 0:
        raise IngestError(f"{path}: graph is empty after cleaning")
    return g


def save_csv_pair(g: UCSGraph, directory) -> None:
    """Write ``nodes.csv`` and ``edges.csv`` preserving vertex order and lengths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "nodes.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "lat", "lon"])
        for vid, (lat, lon) in zip(g.vertex_ids, g.raw_coords.tolist()):
            w.writerow([vid, repr(lat), repr(lon)])
    u, v, l = g.edges()
    with open(directory / "edges.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "length_m"])
        for a, b, length in zip(u.tolist(), v.tolist(), l.tolist()):
            w.writerow([g.vertex_ids[a], g.vertex_ids[b], repr(length)])


# ---------------------------------------------------------------------------
# Graph cache (single JSON document) and content hash
# ---------------------------------------------------------------------------

def graph_to_json(g: UCSGraph) -> str:
    u, v, l = g.edges()
    doc = {
        "vertex_ids": list(g.vertex_ids),
        "raw_coords": g.raw_coords.tolist(),
        "coords": g.coords.tolist(),
        "edges": [[a, b, c] for a, b, c in zip(u.tolist(), v.tolist(), l.tolist())],
        "meta": {k: g.meta[k] for k in sorted(g.meta)},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def graph_from_json(text: str) -> UCSGraph:
    doc = json.loads(text)
    return build_graph(
        doc["vertex_ids"],
        doc["raw_coords"],
        [tuple(e) for e in doc["edges"]],
        coords=doc["coords"],
        meta=doc.get("meta", {}),
    )


def save_graph_cache(g: UCSGraph, path) -> str:
    text = graph_to_json(g)
    Path(path).write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_graph_cache(path) -> UCSGraph:
    return graph_from_json(Path(path).read_text(encoding="utf-8"))


def graph_hash(g: UCSGraph) -> str:
    """SHA-256 of the canonical cache serialization, ignoring ``meta``."""
    u, v, l = g.edges()
    doc = {
        "vertex_ids": list(g.vertex_ids),
        "raw_coords": g.raw_coords.tolist(),
        "coords": g.coords.tolist(),
        "edges": [[a, b, c] for a, b, c in zip(u.tolist(), v.tolist(), l.tolist())],
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Matrices and queries
# ---------------------------------------------------------------------------

def build_laplacian(g: UCSGraph) -> sp.csr_matrix:
    """Length-weighted Laplacian: ``L_ij = -1/l_ij`` off-diagonal, zero row sums."""
    assert np.all(g.lengths > 0), "zero-length edge"
    off = sp.csr_matrix((-1.0 / g.lengths, g.indices, g.indptr), shape=(g.n, g.n))
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return (off + sp.diags(diag, format="csr")).tocsr()


def shortest_hops(g: UCSGraph, source: int, targets: Iterable[int]) -> dict[int, int]:
    """Unweighted BFS distances from ``source``; stops once all targets are reached."""
    targets = set(int(t) for t in targets)
    out: dict[int, int] = {}
    if source in targets:
        out[source] = 0
    remaining = len(targets) - len(out)
    if remaining == 0:
        return out
    adj = g._adj_lists
    dist = {source: 0}
    queue = deque([source])
    while queue and remaining:
        u = queue.popleft()
        du = dist[u] + 1
        for w in adj[u]:
            if w not in dist:
                dist[w] = du
                if w in targets:
                    out[w] = du
                    remaining -= 1
                queue.append(w)
    return out


def graph_ball(g: UCSGraph, center: int, r: float) -> np.ndarray:
    """Vertices whose length-weighted distance from ``center`` is at most ``r``."""
    if r < 0:
        raise ValueError(f"radius must be non-negative, got {r}")
    dist = {center: 0.0}
    done: set[int] = set()
    heap = [(0.0, center)]
    ip, ix, ln = g.indptr, g.indices, g.lengths
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for k in range(ip[u], ip[u + 1]):
            w = int(ix[k])
            nd = d + float(ln[k])
            if nd <= r and nd < dist.get(w, math.inf):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return np.array(sorted(done), dtype=np.int64)


def euclidean_ball(g: UCSGraph, center: int, r: float) -> np.ndarray:
    """Vertices within planar distance ``r`` of ``center`` (inclusive)."""
    if r < 0:
        raise ValueError(f"radius must be non-negative, got {r}")
    cand = np.asarray(g.kdtree.query_ball_point(g.coords[center], r * (1 + 1e-9) + 1e-9), dtype=np.int64)
    d = np.hypot(*(g.coords[cand] - g.coords[center]).T)
    return np.sort(cand[d <= r])


def knn_spatial(g: UCSGraph, center: int, m: int) -> np.ndarray:
    """The ``m`` vertices nearest to ``center`` (itself included), ties by index."""
    return knn_spatial_many(g, np.array([center]), m)[0]


def knn_spatial_many(g: UCSGraph, centers: np.ndarray, m: int) -> np.ndarray:
    """Row ``i`` holds the ``m``-nearest set of ``centers[i]``, sorted by index."""
    if not 1 <= m <= g.n:
        raise ValueError(f"m must be in [1, {g.n}], got {m}")
    centers = np.asarray(centers, dtype=np.int64)
    k = min(m + 1, g.n)
    dists, idx = g.kdtree.query(g.coords[centers], k=k)
    dists = dists.reshape(len(centers), k)
    idx = idx.reshape(len(centers), k)
    out = np.empty((len(centers), m), dtype=np.int64)
    for row, c in enumerate(centers):
        if k == m or dists[row, m - 1] < dists[row, m] * (1 - 1e-12) - 1e-12:
            out[row] = np.sort(idx[row, :m])
            continue
        # possible tie at the cut: resolve exactly by (distance, index)
        rad = dists[row, m - 1]
        cand = np.asarray(g.kdtree.query_ball_point(g.coords[c], rad * (1 + 1e-9) + 1e-9), dtype=np.int64)
        d = np.hypot(*(g.coords[cand] - g.coords[c]).T)
        order = np.lexsort((cand, cand != c, d))
        out[row] = np.sort(cand[order[:m]])
    return out
