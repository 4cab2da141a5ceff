"""Vertex ordering methods."""

from .base import Embedding1D, OrderingError
from .baselines import original_order, random_order
from .fiedler import fiedler_order, laplacian_fiedler
from .tsne import TsneParams, tsne_order
from .umap import UmapParams, umap_order

METHODS = ("fiedler", "tsne", "umap", "original", "random")
STOCHASTIC = ("tsne", "umap", "random")


def compute_ordering(g, method: str, params: dict | None = None, seed: int | None = None):
    """Dispatch by method name; returns ``(Ordering, Embedding1D | None)``."""
    params = dict(params or {})
    if method == "fiedler":
        return fiedler_order(g, **params)
    if method == "tsne":
        return tsne_order(g, TsneParams(**params, seed=seed))
    if method == "umap":
        return umap_order(g, UmapParams(**params, seed=seed))
    if method == "random":
        return random_order(g, seed), None
    if method == "original":
        return original_order(g), None
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


__all__ = [
    "Embedding1D", "OrderingError", "METHODS", "STOCHASTIC", "TsneParams", "UmapParams",
    "compute_ordering", "fiedler_order", "laplacian_fiedler", "original_order", "random_order",
    "tsne_order", "umap_order",
]
