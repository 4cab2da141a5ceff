"""Boxplot statistics, per-city normalization and SVG/GeoJSON/CSV exports."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .graph import UCSGraph

LOG_FLOOR = 1e-9
STAT_FIELDS = ("count", "mean", "min", "q1", "median", "q3", "max", "lower_whisker", "upper_whisker")


class ExportError(OSError):
    pass


@dataclass(frozen=True)
class BoxplotStats:
    count: int
    mean: float
    min: float
    q1: float
    median: float
    q3: float
    max: float
    lower_whisker: float
    upper_whisker: float
    outliers: tuple[float, ...]

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    def as_dict(self) -> dict:
        d = asdict(self)
        d["outliers"] = list(self.outliers)
        return d


def summarize(values) -> BoxplotStats:
    """Type-7 quartiles and Tukey whiskers (furthest points within 1.5 IQR)."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("cannot summarize an empty series")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    q1, med, q3 = np.percentile(v, [25, 50, 75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    lw, uw = float(inside.min()), float(inside.max())
    outliers = tuple(float(x) for x in v[(v < lw) | (v > uw)])
    return BoxplotStats(
        count=int(v.size), mean=float(v.mean()), min=float(v[0]), q1=float(q1), median=float(med),
        q3=float(q3), max=float(v[-1]), lower_whisker=lw, upper_whisker=uw, outliers=outliers,
    )


def normalize_per_city(series: Mapping[tuple[str, str, str], Sequence[float]]) -> dict[tuple[str, str, str], np.ndarray]:
    """Divide each ``(city, method, metric)`` series by the max over its ``(city, metric)`` group.

    Groups whose maximum is zero pass through unchanged.
    """
    group_max: dict[tuple[str, str], float] = defaultdict(lambda: -math.inf)
    for (city, _method, metric), vals in series.items():
        vals = np.asarray(vals, dtype=float)
        if vals.size == 0:
            raise ValueError(f"empty series for {(city, _method, metric)}")
        group_max[city, metric] = max(group_max[city, metric], float(vals.max()))
    out = {}
    for key, vals in series.items():
        vals = np.asarray(vals, dtype=float)
        top = group_max[key[0], key[2]]
        out[key] = vals / top if top > 0 else vals.copy()
    return out


def log_scale(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("log_scale needs non-negative values")
    return np.log10(np.maximum(v, LOG_FLOOR))


# ---------------------------------------------------------------------------
# Colors
# ---------------------------------------------------------------------------

def _hex_to_rgb(h: str) -> tuple[int, int, int]:
    h = h.lstrip("#")
    return int(h[0:2], 16), int(h[2:4], 16), int(h[4:6], 16)


@dataclass(frozen=True)
class ColorScale:
    name: str
    colors: tuple[str, ...]
    positions: tuple[float, ...]

    def __post_init__(self):
        p = self.positions
        if len(p) != len(self.colors) or len(p) < 2:
            raise ValueError("need matching colors and positions (at least two)")
        if p[0] != 0.0 or p[-1] != 1.0 or any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("positions must increase strictly from 0 to 1")

    def rgb(self, t: float) -> tuple[int, int, int]:
        t = min(max(float(t), 0.0), 1.0)
        k = int(np.searchsorted(self.positions, t, side="right")) - 1
        k = min(k, len(self.positions) - 2)
        p0, p1 = self.positions[k], self.positions[k + 1]
        f = (t - p0) / (p1 - p0)
        c0, c1 = _hex_to_rgb(self.colors[k]), _hex_to_rgb(self.colors[k + 1])
        return tuple(int(round(a + f * (b - a))) for a, b in zip(c0, c1))

    def __call__(self, t: float) -> str:
        return "#%02X%02X%02X" % self.rgb(t)


ORDER_SCALE = ColorScale(
    "order", ("#00008B", "#87CEEB", "#2E8B57", "#FFD700", "#FF0000"), (0.0, 0.25, 0.5, 0.75, 1.0)
)
ERROR_SCALE = ColorScale("error", ("#F5F5DC", "#FF0000"), (0.0, 1.0))
SCALES = {"order": ORDER_SCALE, "error": ERROR_SCALE}


def _attr(text: str) -> str:
    return escape(str(text), {'"': "&quot;"})


def _unit_interval(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def _write_text(out, text: str) -> Path:
    out = Path(out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ExportError(f"cannot write {out}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Maps
# ---------------------------------------------------------------------------

def render_map_svg(g: UCSGraph, values, scale: ColorScale, *, width: int = 800, radius: float = 2.0,
                   draw_edges: bool = True, title: str | None = None) -> str:
    values = np.asarray(values, dtype=float)
    t = _unit_interval(values)
    xy = g.coords
    margin = 10.0
    lo = xy.min(axis=0)
    ext = np.maximum(xy.max(axis=0) - lo, 1e-9)
    s = (width - 2 * margin) / max(ext[0], ext[1])
    height = int(math.ceil(ext[1] * s + 2 * margin))
    px = margin + (xy[:, 0] - lo[0]) * s
    py = height - margin - (xy[:, 1] - lo[1]) * s
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    if title:
        lines.append(f"<title>{escape(title)}</title>")
    lines.append(f'<rect width="{width}" height="{height}" fill="#FFFFFF"/>')
    if draw_edges:
        u, v, _ = g.edges()
        lines.append('<g stroke="#BBBBBB" stroke-width="0.5" fill="none">')
        for a, b in zip(u.tolist(), v.tolist()):
            lines.append(f'<polyline points="{px[a]:.2f},{py[a]:.2f} {px[b]:.2f},{py[b]:.2f}"/>')
        lines.append("</g>")
    lines.append('<g stroke="none">')
    for i in np.argsort(t, kind="stable").tolist():
        lines.append(
            f'<circle cx="{px[i]:.2f}" cy="{py[i]:.2f}" r="{radius:g}" fill="{scale(t[i])}" '
            f'data-id="{_attr(g.vertex_ids[i])}" data-value="{float(values[i])!r}"/>'
        )
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_map_geojson(g: UCSGraph, values, ranks=None) -> str:
    values = np.asarray(values, dtype=float)
    features = []
    for i in range(g.n):
        lat, lon = g.raw_coords[i].tolist()
        props = {"id": g.vertex_ids[i], "value": float(values[i])}
        props["rank"] = int(ranks[i]) + 1 if ranks is not None else None
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [lon, lat]},
            "properties": props,
        })
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc, separators=(",", ":")) + "\n"


def export_map(g: UCSGraph, values, scale: ColorScale, out, format: str = "svg", *, ranks=None,
               draw_edges: bool = True, title: str | None = None) -> Path:
    """Write a per-vertex color-coded map.

    ``values`` are min-max normalized onto ``scale``. GeoJSON points carry
    ``{id, value, rank}`` with ``rank`` 1-based (``None`` when not given).
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (g.n,) or not np.all(np.isfinite(values)):
        raise ValueError("values must be finite with one entry per vertex")
    if format == "svg":
        text = render_map_svg(g, values, scale, draw_edges=draw_edges, title=title)
    elif format == "geojson":
        text = render_map_geojson(g, values, ranks)
    else:
        raise ValueError(f"unknown map format {format!r}")
    return _write_text(out, text)


# ---------------------------------------------------------------------------
# Boxplots
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxplotLayout:
    width: int
    height: int
    top: float
    bottom: float
    vmin: float
    vmax: float

    def y(self, value: float) -> float:
        span = self.vmax - self.vmin
        f = 0.5 if span <= 0 else (value - self.vmin) / span
        return self.bottom - f * (self.bottom - self.top)


def boxplot_layout(stats: Mapping[str, BoxplotStats], with_outliers: bool, group_width: int = 80,
                   height: int = 400) -> BoxplotLayout:
    lows = [s.min if with_outliers else s.lower_whisker for s in stats.values()]
    highs = [s.max if with_outliers else s.upper_whisker for s in stats.values()]
    vmin, vmax = min(lows), max(highs)
    pad = 0.05 * (vmax - vmin) if vmax > vmin else 0.5
    width = 60 + group_width * len(stats) + 20
    return BoxplotLayout(width, height, 20.0, height - 40.0, vmin - pad, vmax + pad)


def render_boxplot_svg(stats: Mapping[str, BoxplotStats], *, with_outliers: bool = True,
                       title: str | None = None, axis_label: str | None = None, group_width: int = 80) -> str:
    if not stats:
        raise ValueError("need at least one method")
    lay = boxplot_layout(stats, with_outliers, group_width)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{lay.width}" height="{lay.height}" '
        f'viewBox="0 0 {lay.width} {lay.height}" font-family="sans-serif" font-size="11">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append(f'<rect width="{lay.width}" height="{lay.height}" fill="#FFFFFF"/>')
    out.append(f'<line class="axis" x1="55" y1="{lay.top:.2f}" x2="55" y2="{lay.bottom:.2f}" stroke="#000000"/>')
    for f in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lay.vmin + f * (lay.vmax - lay.vmin)
        yy = lay.y(v)
        out.append(f'<text x="50" y="{yy + 4:.2f}" text-anchor="end">{v:.3g}</text>')
    if axis_label:
        out.append(f'<text x="12" y="{(lay.top + lay.bottom) / 2:.2f}" '
                   f'transform="rotate(-90 12 {(lay.top + lay.bottom) / 2:.2f})" text-anchor="middle">'
                   f'{escape(axis_label)}</text>')
    for gi, (label, s) in enumerate(stats.items()):
        x0 = 60 + gi * group_width + group_width * 0.2
        bw = group_width * 0.6
        xc = x0 + bw / 2
        out.append(f'<g class="box-group" data-label="{_attr(label)}">')
        out.append(f'<line class="whisker" x1="{xc:.2f}" y1="{lay.y(s.lower_whisker):.2f}" x2="{xc:.2f}" '
                   f'y2="{lay.y(s.q1):.2f}" stroke="#000000"/>')
        out.append(f'<line class="whisker" x1="{xc:.2f}" y1="{lay.y(s.q3):.2f}" x2="{xc:.2f}" '
                   f'y2="{lay.y(s.upper_whisker):.2f}" stroke="#000000"/>')
        out.append(f'<rect class="box" x="{x0:.2f}" y="{lay.y(s.q3):.2f}" width="{bw:.2f}" '
                   f'height="{lay.y(s.q1) - lay.y(s.q3):.2f}" fill="#87CEEB" stroke="#000000" '
                   f'data-q1="{s.q1!r}" data-q3="{s.q3!r}"/>')
        out.append(f'<line class="median" x1="{x0:.2f}" y1="{lay.y(s.median):.2f}" x2="{x0 + bw:.2f}" '
                   f'y2="{lay.y(s.median):.2f}" stroke="#FF0000" stroke-width="2" data-value="{s.median!r}"/>')
        if with_outliers:
            for o in s.outliers:
                out.append(f'<circle class="outlier" cx="{xc:.2f}" cy="{lay.y(o):.2f}" r="2" fill="none" '
                           f'stroke="#000000"/>')
        out.append(f'<text x="{xc:.2f}" y="{lay.bottom + 18:.2f}" text-anchor="middle">{escape(label)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_boxplot_svg(stats: Mapping[str, BoxplotStats], out, *, with_outliers: bool = True,
                       title: str | None = None, axis_label: str | None = None) -> Path:
    """Grouped box-and-whisker chart, one group per entry of ``stats`` in order."""
    return _write_text(out, render_boxplot_svg(stats, with_outliers=with_outliers, title=title,
                                               axis_label=axis_label))


# ---------------------------------------------------------------------------
# Tabular report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportEntry:
    city: str
    method: str
    metric: str
    stats: BoxplotStats
    provenance: Mapping[str, object]


def export_report(entries: Iterable[ReportEntry], out_csv, out_json=None) -> tuple[Path, Path | None]:
    """Long-format ``city,method,metric,stat,value`` CSV plus a JSON mirror."""
    entries = list(entries)
    sio = io.StringIO()
    w = csv.writer(sio, lineterminator="\n")
    w.writerow(["city", "method", "metric", "stat", "value"])
    for e in entries:
        for name in STAT_FIELDS:
            w.writerow([e.city, e.method, e.metric, name, repr(getattr(e.stats, name))])
        w.writerow([e.city, e.method, e.metric, "n_outliers", repr(len(e.stats.outliers))])
    csv_path = _write_text(out_csv, sio.getvalue())
    json_path = None
    if out_json is not None:
        doc = [
            {"city": e.city, "method": e.method, "metric": e.metric, "stats": e.stats.as_dict(),
             "provenance": e.provenance}
            for e in entries
        ]
        json_path = _write_text(out_json, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path
