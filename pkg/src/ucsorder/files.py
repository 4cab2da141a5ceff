"""CSV/JSON artifact formats shared by the CLI stages.

Ordering files hold 1-based ranks (``vertex_id,rank``); embeddings hold
``vertex_id,value``; metric tables hold ``vertex_id`` plus one column per
computed measure. Every file can carry a ``<name>.json`` sidecar.
"""

from __future__ import annotations

import csv
import io
import json
import os
from contextlib import contextmanager
from contextvars import ContextVar
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .graph import Ordering, UCSGraph
from .metrics import METRICS, MetricSeries
from .orderings.base import Embedding1D

PARTIAL_SUFFIX = ".partial"

_journal: ContextVar[list | None] = ContextVar("_journal", default=None)


def partial_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + PARTIAL_SUFFIX)


@contextmanager
def staged(path) -> Iterator[Path]:
    """Yield ``<path>.partial`` for writing; rename onto ``path`` only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = partial_path(path)
    yield tmp
    os.replace(tmp, path)
    journal = _journal.get()
    if journal is not None:
        journal.append(path)


@contextmanager
def journal() -> Iterator[list[Path]]:
    """Collect every path completed through :func:`staged` inside the block."""
    written: list[Path] = []
    token = _journal.set(written)
    try:
        yield written
    finally:
        _journal.reset(token)


def demote(paths) -> None:
    """Rename finished artifacts of an aborted run to ``<name>.partial``."""
    for p in paths:
        if Path(p).exists():
            os.replace(p, partial_path(p))


def write_text(path, text: str) -> Path:
    with staged(path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return Path(path)


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(".json")


def write_sidecar(path, doc: Mapping) -> Path:
    return write_text(sidecar_path(path), dumps_json(doc))


def read_sidecar(path) -> dict:
    p = sidecar_path(path)
    return json.loads(p.read_text(encoding="utf-8")) if p.exists() else {}


def _csv_text(header: Sequence[str], rows) -> str:
    sio = io.StringIO()
    w = csv.writer(sio, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return sio.getvalue()


def ordering_csv(g: UCSGraph, ordering: Ordering) -> str:
    ranks = (ordering.rank_of + 1).tolist()
    return _csv_text(["vertex_id", "rank"], zip(g.vertex_ids, ranks))


def read_ordering(g: UCSGraph, path, method: str | None = None) -> Ordering:
    side = read_sidecar(path)
    rank_of = np.full(g.n, -1, dtype=np.int64)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rank_of[g.index_of(row["vertex_id"])] = int(row["rank"]) - 1
    if np.any(rank_of < 0):
        raise ValueError(f"{path}: ordering does not cover every vertex")
    return Ordering(rank_of, method or side.get("method", "unknown"), side.get("params", {}))


def embedding_csv(g: UCSGraph, emb: Embedding1D) -> str:
    return _csv_text(["vertex_id", "value"], ((v, repr(float(x))) for v, x in zip(g.vertex_ids, emb.value)))


def metrics_csv(g: UCSGraph, series: Sequence[MetricSeries]) -> str:
    by_name = {s.metric: s for s in series}
    cols = [m for m in METRICS if m in by_name]
    rows = []
    for i, vid in enumerate(g.vertex_ids):
        rows.append([vid] + [repr(float(by_name[c].values[i])) for c in cols])
    return _csv_text(["vertex_id"] + cols, rows)


def read_metrics(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = [c for c in reader.fieldnames or [] if c != "vertex_id"]
        data: dict[str, list[float]] = {c: [] for c in cols}
        ids = []
        for row in reader:
            ids.append(row["vertex_id"])
            for c in cols:
                data[c].append(float(row[c]))
    out = {c: np.array(v) for c, v in data.items()}
    out["vertex_id"] = np.array(ids, dtype=object)
    return out
