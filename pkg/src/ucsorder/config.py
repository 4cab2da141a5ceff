"""Pipeline configuration (JSON) with strict validation.

Schema (unknown keys are rejected at every level)::

    {
      "graph": {"path": str, "format": "csv-pair" | "osm-xml"},
      "city": str,                         # optional, default: graph file stem
      "methods": [
        {"name": "fiedler" | "tsne" | "umap" | "original" | "random",
         "params": {name: value | [values...]},   # lists expand to a sweep
         "seed": int}                             # required for tsne/umap/random
      ],
      "metrics": ["geo_fwd", "geo_inv", "topo_fwd", "topo_inv"],
      "window_frac": 0.01,                 # or "window_m": int
      "radius_m": 500.0,
      "ball": "graph" | "euclidean",
      "output_dir": str,
      "normalize": null | "per-city-max",
      "log": false,
      "maps": ["svg", "geojson"],
      "jobs": 1
    }
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .graph import FORMATS
from .metrics import BALL_MODES, METRICS
from .orderings import METHODS, STOCHASTIC, TsneParams, UmapParams

DEFAULT_WINDOW_FRAC = 0.01
DEFAULT_RADIUS_M = 500.0
NORMALIZERS = (None, "per-city-max")
MAP_FORMATS = ("svg", "geojson")

_METHOD_PARAMS = {
    "fiedler": set(),
    "tsne": {f.name for f in dataclasses.fields(TsneParams)} - {"seed"},
    "umap": {f.name for f in dataclasses.fields(UmapParams)} - {"seed"},
    "original": set(),
    "random": set(),
}
_TOP_KEYS = {"graph", "city", "methods", "metrics", "window_frac", "window_m", "radius_m", "ball",
             "output_dir", "normalize", "log", "maps", "jobs"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    @property
    def label(self) -> str:
        parts = [self.name]
        parts += [f"{k}-{_fmt(v)}" for k, v in sorted(self.params.items())]
        if self.seed is not None:
            parts.append(f"seed-{self.seed}")
        return "_".join(parts)


def _fmt(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class PipelineConfig:
    graph_path: str
    graph_format: str
    output_dir: str
    methods: tuple[MethodSpec, ...]
    city: str = ""
    metrics: tuple[str, ...] = METRICS
    window_frac: float | None = DEFAULT_WINDOW_FRAC
    window_m: int | None = None
    radius_m: float = DEFAULT_RADIUS_M
    ball: str = "graph"
    normalize: str | None = None
    log: bool = False
    maps: tuple[str, ...] = MAP_FORMATS
    jobs: int = 1

    def window_size(self, n: int) -> int:
        """Absolute window, else ``max(2, round(window_frac * n))`` capped at ``n``."""
        if self.window_m is not None:
            return min(self.window_m, n)
        return min(n, max(2, round(self.window_frac * n)))


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _check_keys(obj: dict, allowed: set, where: str):
    _require(isinstance(obj, dict), f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key {unknown[0]!r}")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _expand_method(raw: dict, i: int) -> list[MethodSpec]:
    where = f"methods[{i}]"
    _check_keys(raw, {"name", "params", "seed"}, where)
    name = raw.get("name")
    _require(name in METHODS, f"{where}: unknown method {name!r}")
    params = raw.get("params", {})
    _check_keys(params, _METHOD_PARAMS[name], f"{where}.params")
    seed = raw.get("seed")
    if name in STOCHASTIC:
        _require(seed is not None, f"{where}: method {name!r} needs a seed")
    _require(seed is None or _is_int(seed), f"{where}.seed: expected an integer")
    for k, v in params.items():
        vals = v if isinstance(v, list) else [v]
        _require(len(vals) > 0, f"{where}.params.{k}: empty sweep")
        _require(all(_is_number(x) or x is None for x in vals), f"{where}.params.{k}: expected numbers")
    keys = sorted(params)
    grids = [params[k] if isinstance(params[k], list) else [params[k]] for k in keys]
    return [MethodSpec(name, dict(zip(keys, combo)), seed) for combo in itertools.product(*grids)]


def config_from_dict(doc: dict, base_dir: Path | None = None) -> PipelineConfig:
    _check_keys(doc, _TOP_KEYS, "config")
    graph = doc.get("graph")
    _require(graph is not None, "config: missing 'graph'")
    _check_keys(graph, {"path", "format"}, "graph")
    _require(isinstance(graph.get("path"), str), "graph.path: expected a string")
    fmt = graph.get("format", "csv-pair")
    _require(fmt in FORMATS, f"graph.format: expected one of {FORMATS}")
    gpath = Path(graph["path"])
    if base_dir is not None and not gpath.is_absolute():
        gpath = base_dir / gpath

    methods_raw = doc.get("methods")
    _require(isinstance(methods_raw, list) and methods_raw, "config: 'methods' must be a non-empty list")
    methods = tuple(m for i, raw in enumerate(methods_raw) for m in _expand_method(raw, i))
    labels = [m.label for m in methods]
    _require(len(set(labels)) == len(labels), "config: duplicate method entries")

    metrics = doc.get("metrics", list(METRICS))
    _require(isinstance(metrics, list) and all(m in METRICS for m in metrics),
             f"metrics: expected a list drawn from {METRICS}")

    window_m = doc.get("window_m")
    window_frac = doc.get("window_frac")
    _require(window_m is None or window_frac is None, "config: give window_frac or window_m, not both")
    if window_m is not None:
        _require(_is_int(window_m) and window_m >= 2, "window_m: expected an integer >= 2")
    else:
        window_frac = DEFAULT_WINDOW_FRAC if window_frac is None else window_frac
        _require(_is_number(window_frac) and 0 < window_frac <= 1, "window_frac: expected a number in (0, 1]")

    radius = doc.get("radius_m", DEFAULT_RADIUS_M)
    _require(_is_number(radius) and radius > 0, "radius_m: expected a positive number")
    ball = doc.get("ball", "graph")
    _require(ball in BALL_MODES, f"ball: expected one of {BALL_MODES}")
    out = doc.get("output_dir", "out")
    _require(isinstance(out, str), "output_dir: expected a string")
    outp = Path(out)
    if base_dir is not None and not outp.is_absolute():
        outp = base_dir / outp
    normalize = doc.get("normalize")
    _require(normalize in NORMALIZERS, f"normalize: expected one of {NORMALIZERS}")
    log = doc.get("log", False)
    _require(isinstance(log, bool), "log: expected a boolean")
    maps = doc.get("maps", list(MAP_FORMATS))
    _require(isinstance(maps, list) and all(m in MAP_FORMATS for m in maps), f"maps: subset of {MAP_FORMATS}")
    jobs = doc.get("jobs", 1)
    _require(_is_int(jobs) and jobs >= 1, "jobs: expected a positive integer")
    city = doc.get("city", gpath.stem if gpath.suffix else gpath.name)
    _require(isinstance(city, str) and city, "city: expected a non-empty string")

    return PipelineConfig(
        graph_path=str(gpath), graph_format=fmt, output_dir=str(outp), methods=methods, city=city,
        metrics=tuple(metrics), window_frac=None if window_m is not None else float(window_frac),
        window_m=window_m, radius_m=float(radius), ball=ball, normalize=normalize, log=log,
        maps=tuple(maps), jobs=jobs,
    )


def parse_config(path) -> PipelineConfig:
    """Load and validate a JSON config; relative paths resolve against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(doc, base_dir=path.parent)
