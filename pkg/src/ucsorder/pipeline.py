"""Ingest -> order -> evaluate -> report/map, with stage-tagged failures.

Output layout under ``output_dir``::

    graph.json                      graph cache (its SHA-256 is the graph_hash)
    orderings/<label>.csv|.json     1-based ranks + provenance sidecar
    embeddings/<label>.csv          1-D values (fiedler/tsne/umap)
    metrics/<label>.csv|.json       per-vertex measures + sidecar
    report.csv, report.json         long-format boxplot statistics
    boxplots/<metric>.svg           with outliers; <metric>_no_outliers.svg
    maps/<label>_order.svg|.geojson
"""

from __future__ import annotations

import contextvars
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import files
from .config import ConfigError, MethodSpec, PipelineConfig
from .graph import IngestError, Ordering, UCSGraph, graph_to_json, load_graph, load_graph_cache
from .metrics import MetricError, MetricSeries, compute_metric
from .orderings import OrderingError, compute_ordering
from .reporting import (ORDER_SCALE, ExportError, ReportEntry, log_scale, normalize_per_city,
                        render_boxplot_svg, render_map_geojson, render_map_svg, summarize, export_report)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_INGEST, EXIT_ORDER, EXIT_METRIC, EXIT_EXPORT = 0, 2, 3, 4, 5, 6


class StageError(RuntimeError):
    def __init__(self, stage: str, code: int, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.code = code


@dataclass
class OrderingResult:
    spec: MethodSpec
    ordering: Ordering
    path: Path


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Stages (also used by the individual CLI subcommands)
# ---------------------------------------------------------------------------

def stage_ingest(path, fmt: str, out_dir) -> tuple[UCSGraph, str]:
    try:
        g = load_graph(path, fmt)
    except (IngestError, OSError) as exc:
        raise StageError("ingest", EXIT_INGEST, str(exc)) from exc
    text = graph_to_json(g)
    files.write_text(Path(out_dir) / "graph.json", text)
    log.info("ingested %s: n=%d, edges=%d", path, g.n, g.n_edges)
    return g, sha256_text(text)


def read_graph_cache(path) -> tuple[UCSGraph, str]:
    text = Path(path).read_text(encoding="utf-8")
    return load_graph_cache(path), sha256_text(text)


def stage_order(g: UCSGraph, ghash: str, spec: MethodSpec, out_dir) -> OrderingResult:
    try:
        ordering, emb = compute_ordering(g, spec.name, spec.params, spec.seed)
    except (OrderingError, ValueError, TypeError) as exc:
        raise StageError("order", EXIT_ORDER, f"{spec.label}: {exc}") from exc
    out_dir = Path(out_dir)
    path = out_dir / "orderings" / f"{spec.label}.csv"
    files.write_text(path, files.ordering_csv(g, ordering))
    files.write_sidecar(path, {"method": spec.name, "params": spec.params, "seed": spec.seed,
                               "graph_hash": ghash, "label": spec.label})
    if emb is not None:
        files.write_text(out_dir / "embeddings" / f"{spec.label}.csv", files.embedding_csv(g, emb))
    return OrderingResult(spec, ordering, path)


def stage_eval(g: UCSGraph, ghash: str, ordering: Ordering, metrics, *, m: int, r: float, ball: str,
               jobs: int, out_path, city: str, provenance: dict) -> list[MetricSeries]:
    series = []
    try:
        for name in metrics:
            series.append(compute_metric(name, g, ordering, m=m, r=r, ball=ball, jobs=jobs))
    except (MetricError, ValueError) as exc:
        raise StageError("eval", EXIT_METRIC, str(exc)) from exc
    files.write_text(out_path, files.metrics_csv(g, series))
    files.write_sidecar(out_path, {
        "city": city,
        "graph_hash": ghash,
        "ordering": provenance,
        "metric_params": {s.metric: dict(s.params) for s in series},
    })
    return series


def collect_report(records: list[tuple[str, str, str, np.ndarray, dict]], normalize: str | None,
                   use_log: bool) -> list[ReportEntry]:
    """``records`` are ``(city, label, metric, values, provenance)``."""
    series = {(c, lbl, met): vals for c, lbl, met, vals, _ in records}
    if normalize == "per-city-max":
        series = normalize_per_city(series)
    entries = []
    for c, lbl, met, _vals, prov in records:
        vals = series[c, lbl, met]
        if use_log:
            vals = log_scale(vals)
        prov = dict(prov, transform={"normalize": normalize, "log": use_log})
        entries.append(ReportEntry(c, lbl, met, summarize(vals), prov))
    return entries


def write_report(entries: list[ReportEntry], out_dir, use_log: bool) -> None:
    out_dir = Path(out_dir)
    with files.staged(out_dir / "report.csv") as csv_tmp, files.staged(out_dir / "report.json") as json_tmp:
        export_report(entries, csv_tmp, json_tmp)
    by_metric: dict[tuple[str, str], dict] = {}
    for e in entries:
        by_metric.setdefault((e.city, e.metric), {})[e.method] = e.stats
    multi_city = len({c for c, _ in by_metric}) > 1
    axis = "log10 value" if use_log else "value"
    for (city, metric), stats in by_metric.items():
        stem = f"{city}_{metric}" if multi_city else metric
        for with_out, suffix in ((True, ""), (False, "_no_outliers")):
            svg = render_boxplot_svg(stats, with_outliers=with_out, title=f"{city} {metric}", axis_label=axis)
            files.write_text(out_dir / "boxplots" / f"{stem}{suffix}.svg", svg)


# ---------------------------------------------------------------------------
# Whole pipeline
# ---------------------------------------------------------------------------

def _run(cfg: PipelineConfig) -> None:
    out = Path(cfg.output_dir)
    g, ghash = stage_ingest(cfg.graph_path, cfg.graph_format, out)
    m = cfg.window_size(g.n)

    def order_job(spec):
        return stage_order(g, ghash, spec, out)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            # each job carries a copy of this context so its writes reach the journal
            futures = [pool.submit(contextvars.copy_context().run, order_job, s) for s in cfg.methods]
            results = [f.result() for f in futures]
    else:
        results = [order_job(s) for s in cfg.methods]

    records = []
    for res in results:
        prov = {"method": res.spec.name, "params": res.spec.params, "seed": res.spec.seed,
                "label": res.spec.label}
        series = stage_eval(g, ghash, res.ordering, cfg.metrics, m=m, r=cfg.radius_m, ball=cfg.ball,
                            jobs=cfg.jobs, out_path=out / "metrics" / f"{res.spec.label}.csv",
                            city=cfg.city, provenance=prov)
        for s in series:
            records.append((cfg.city, res.spec.label, s.metric, np.asarray(s.values),
                            dict(prov, metric_params=dict(s.params), graph_hash=ghash)))

    try:
        entries = collect_report(records, cfg.normalize, cfg.log)
        write_report(entries, out, cfg.log)
        for res in results:
            title = f"{cfg.city} {res.spec.label}"
            if "svg" in cfg.maps:
                files.write_text(out / "maps" / f"{res.spec.label}_order.svg",
                                 render_map_svg(g, res.ordering.rank_of, ORDER_SCALE, title=title))
            if "geojson" in cfg.maps:
                files.write_text(out / "maps" / f"{res.spec.label}_order.geojson",
                                 render_map_geojson(g, res.ordering.rank_of + 1, res.ordering.rank_of))
    except (OSError, ValueError) as exc:
        raise StageError("report", EXIT_EXPORT, str(exc)) from exc


def run_pipeline(cfg: PipelineConfig) -> int:
    """Execute every stage and return the process exit status.

    When a stage fails, the artifacts already written by this run are renamed
    to ``<name>.partial`` so they cannot be mistaken for a finished run.
    """
    with files.journal() as written:
        try:
            _run(cfg)
        except StageError as exc:
            log.error("%s", exc)
            code = exc.code
        except ConfigError as exc:
            log.error("[config] %s", exc)
            code = EXIT_CONFIG
        except (ExportError, OSError) as exc:
            log.error("[export] %s", exc)
            code = EXIT_EXPORT
        else:
            return EXIT_OK
    files.demote(written)
    return code
