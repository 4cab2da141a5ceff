"""Graph builders and brute-force reference implementations for tests.

The reference functions deliberately avoid the package's own query code:
distances come from networkx or plain loops, windows from explicit rank
arithmetic, nearest neighbors from a full sort.
"""

from __future__ import annotations

import math

import networkx as nx
import numpy as np

from ucsorder.graph import graph_from_planar


def path_graph(n, spacing=1.0):
    return graph_from_planar([(i * spacing, 0.0) for i in range(n)],
                             [(i, i + 1, spacing) for i in range(n - 1)])


def grid_graph(rows, cols, spacing=1.0):
    coords = [(c * spacing, r * spacing) for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1, spacing))
            if r + 1 < rows:
                edges.append((i, i + cols, spacing))
    return graph_from_planar(coords, edges)


def random_connected_graph(rng, n, size=2000.0, extra=1.5):
    """Random points with a random spanning tree plus short extra edges."""
    pts = rng.uniform(0.0, size, (n, 2))
    edges = {}

    def add(a, b):
        if a == b:
            return
        a, b = min(a, b), max(a, b)
        d = math.hypot(*(pts[a] - pts[b]))
        edges[a, b] = max(d, 1e-3) * rng.uniform(1.0, 1.3)

    for i in range(1, n):
        d = np.hypot(*(pts[:i] - pts[i]).T)
        near = np.argsort(d)[: min(3, i)]
        add(i, int(rng.choice(near)))
    for _ in range(int(extra * n) - (n - 1)):
        i = int(rng.integers(n))
        d = np.hypot(*(pts - pts[i]).T)
        add(i, int(rng.choice(np.argsort(d)[1:6])))
    return graph_from_planar(pts, [(a, b, l) for (a, b), l in edges.items()])


def street_like_graph(rng, rows, cols, spacing=100.0, jitter=20.0, drop=0.15):
    """Jittered grid with some blocks removed, reduced to its largest component."""
    from ucsorder.graph import largest_component

    coords = np.array([(c * spacing, r * spacing) for r in range(rows) for c in range(cols)], dtype=float)
    coords += rng.uniform(-jitter, jitter, coords.shape)
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            for j in ([i + 1] if c + 1 < cols else []) + ([i + cols] if r + 1 < rows else []):
                if rng.random() >= drop:
                    edges.append((i, j))
    return largest_component(graph_from_planar(coords, edges), reproject=False)


def city_like_graph(rng, n=2000, scale=1500.0, max_edge=600.0, keep=0.7):
    """Street proxy with a dense core and a sparse periphery.

    Points fall off exponentially with distance from the center; streets are
    short Delaunay edges, randomly thinned. The result is the first ``n``
    vertices reached by BFS from the most central vertex, so it is connected.
    """
    from scipy.spatial import Delaunay

    from ucsorder.graph import largest_component

    total = int(n * 1.3)
    r = rng.exponential(scale, total)
    th = rng.uniform(0.0, 2 * math.pi, total)
    pts = np.c_[r * np.cos(th), r * np.sin(th)]
    edges = set()
    for s in Delaunay(pts).simplices:
        for a, b in ((s[0], s[1]), (s[1], s[2]), (s[0], s[2])):
            a, b = int(min(a, b)), int(max(a, b))
            if math.hypot(*(pts[a] - pts[b])) < max_edge and rng.random() < keep:
                edges.add((a, b))
    g = largest_component(graph_from_planar(pts, sorted(edges)), reproject=False)
    return bfs_prefix(g, n)


def bfs_prefix(g, n):
    """Connected subgraph on the ``n`` vertices closest (in hops) to the most central vertex."""
    from ucsorder.graph import shortest_hops, subgraph

    if g.n < n:
        raise ValueError(f"graph has only {g.n} vertices")
    c = int(np.argmin(np.hypot(*(g.coords - g.coords.mean(axis=0)).T)))
    hops = shortest_hops(g, c, list(range(g.n)))
    return subgraph(g, sorted(hops, key=lambda v: (hops[v], v))[:n], reproject=False)


def to_nx(g):
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    u, v, l = g.edges()
    for a, b, w in zip(u.tolist(), v.tolist(), l.tolist()):
        G.add_edge(a, b, weight=w)
    return G


# ---------------------------------------------------------------------------
# Brute-force measures
# ---------------------------------------------------------------------------

def bf_knn(coords, center, m):
    d = [math.hypot(coords[j][0] - coords[center][0], coords[j][1] - coords[center][1])
         for j in range(len(coords))]
    order = sorted(range(len(coords)), key=lambda j: (d[j], j != center, j))
    return set(order[:m])


def bf_diag(coords, members):
    xs = [coords[j][0] for j in members]
    ys = [coords[j][1] for j in members]
    return math.hypot(max(xs) - min(xs), max(ys) - min(ys))


def bf_geo_fwd(g, rank_of, m):
    n = g.n
    coords = g.coords.tolist()
    vertex_at = [0] * n
    for v, k in enumerate(rank_of):
        vertex_at[k] = v
    out = []
    for v in range(n):
        k = rank_of[v]
        start = min(max(k - m // 2, 0), n - m)
        window = [vertex_at[t] for t in range(start, start + m)]
        raw = bf_diag(coords, window)
        opt = bf_diag(coords, bf_knn(coords, v, m))
        out.append(raw / max(opt, 1.0))
    return out


def bf_geo_inv(g, rank_of, r, mode="graph"):
    out = []
    if mode == "graph":
        dist = dict(nx.all_pairs_dijkstra_path_length(to_nx(g)))
    coords = g.coords.tolist()
    for v in range(g.n):
        if mode == "graph":
            ball = [u for u, d in dist[v].items() if d <= r]
        else:
            ball = [u for u in range(g.n)
                    if math.hypot(coords[u][0] - coords[v][0], coords[u][1] - coords[v][1]) <= r]
        ranks = [rank_of[u] for u in ball]
        out.append((max(ranks) - min(ranks)) / len(ball))
    return out


def bf_topo_fwd(g, rank_of):
    n = g.n
    hops = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
    vertex_at = [0] * n
    for v, k in enumerate(rank_of):
        vertex_at[k] = v
    out = []
    for v in range(n):
        deg = int(g.degree[v])
        m = deg if deg % 2 == 0 else deg + 1
        k = rank_of[v]
        window = [vertex_at[t] for t in range(k - m // 2, k + m // 2 + 1) if 0 <= t < n and t != k]
        out.append(max((hops[v][u] for u in window), default=0))
    return out


def bf_topo_inv(g, rank_of):
    out = []
    for v in range(g.n):
        nbrs = [u for u, _ in g.adjacency[v]]
        out.append(max(abs(rank_of[v] - rank_of[u]) for u in nbrs) / len(nbrs))
    return out


def hop_window_fixture():
    """Vertex of degree 3 at 1-based rank 37 whose rank window {35, 36, 38, 39}
    sits at 3, 1, 2 and 29 hops.  Returns ``(graph, rank_of, center)``."""
    # 0 = center; 1, 2, 3 its neighbors; 4 hangs off 2; 5 off 4;
    # 3 starts a chain whose far end (vertex 33) is 29 hops out; 34..43 pad off 1.
    edges = [(0, 1), (0, 2), (0, 3), (2, 4), (4, 5)]
    chain = [3] + list(range(6, 34))
    edges += list(zip(chain[:-1], chain[1:]))
    pad = [1] + list(range(34, 44))
    edges += list(zip(pad[:-1], pad[1:]))
    n = 44
    coords = [(float(i), float(i % 7)) for i in range(n)]
    g = graph_from_planar(coords, edges)
    fixed = {5: 34, 1: 35, 0: 36, 4: 37, 33: 38}   # 0-based ranks
    rest = iter(r for r in range(n) if r not in fixed.values())
    rank_of = np.array([fixed[v] if v in fixed else next(rest) for v in range(n)])
    return g, rank_of, 0


def rank_gap_fixture():
    """Vertex at 1-based rank 106 whose three neighbors hold ranks 110, 105 and 95."""
    n = 120
    edges = [(0, 1), (0, 2), (0, 3)] + [(i, i + 1) for i in range(3, n - 1)]
    coords = [(float(i), 0.0) for i in range(n)]
    g = graph_from_planar(coords, edges)
    fixed = {0: 105, 1: 109, 2: 104, 3: 94}
    rest = iter(r for r in range(n) if r not in fixed.values())
    rank_of = np.array([fixed[v] if v in fixed else next(rest) for v in range(n)])
    return g, rank_of, 0
