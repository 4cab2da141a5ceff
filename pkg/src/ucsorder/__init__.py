"""Vertex orderings for street graphs and local measures of their quality."""

from .graph import (
    IngestError, Ordering, UCSGraph, build_graph, build_laplacian, euclidean_ball, graph_ball,
    graph_from_planar, knn_spatial, load_graph, save_csv_pair, shortest_hops,
)
from .metrics import (
    MetricSeries, WindowSpec, adaptive_window_size, compute_metric, geometric_forward, geometric_inverse,
    ordering_window, topological_forward, topological_inverse,
)
from .orderings import (
    Embedding1D, OrderingError, TsneParams, UmapParams, compute_ordering, fiedler_order, original_order,
    random_order, tsne_order, umap_order,
)

__version__ = "0.1.0"

__all__ = [
    "IngestError", "Ordering", "UCSGraph", "build_graph", "build_laplacian", "euclidean_ball", "graph_ball",
    "graph_from_planar", "knn_spatial", "load_graph", "save_csv_pair", "shortest_hops",
    "MetricSeries", "WindowSpec", "adaptive_window_size", "compute_metric", "geometric_forward",
    "geometric_inverse", "ordering_window", "topological_forward", "topological_inverse",
    "Embedding1D", "OrderingError", "TsneParams", "UmapParams", "compute_ordering", "fiedler_order",
    "original_order", "random_order", "tsne_order", "umap_order",
]
