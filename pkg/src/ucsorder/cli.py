"""Command-line entry point: ``ucsorder {ingest,order,eval,report,map,run}``.

Exit codes: 0 success, 2 config error, 3 ingest error, 4 ordering error,
5 metric error, 6 export error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import files
from .config import DEFAULT_RADIUS_M, DEFAULT_WINDOW_FRAC, ConfigError, MethodSpec, parse_config
from .graph import FORMATS
from .metrics import BALL_MODES, METRICS
from .orderings import METHODS, STOCHASTIC
from .pipeline import (EXIT_CONFIG, EXIT_EXPORT, EXIT_OK, StageError, collect_report, read_graph_cache,
                       run_pipeline, stage_eval, stage_ingest, stage_order, write_report)
from .reporting import SCALES, export_map

log = logging.getLogger("ucsorder")


def _window(args, n: int) -> int:
    if args.window_m is not None:
        return min(args.window_m, n)
    return min(n, max(2, round(args.window_frac * n)))


def cmd_ingest(args) -> int:
    _, ghash = stage_ingest(args.input, args.format, args.out)
    print(ghash)
    return EXIT_OK


def cmd_order(args) -> int:
    if args.method in STOCHASTIC and args.seed is None:
        raise ConfigError(f"method {args.method!r} needs --seed")
    params = {}
    if args.method == "tsne":
        for key in ("perplexity", "iterations", "learning_rate"):
            if getattr(args, key) is not None:
                params[key] = getattr(args, key)
    elif args.method == "umap":
        for key in ("k", "min_dist", "epochs"):
            if getattr(args, key) is not None:
                params[key] = getattr(args, key)
    g, ghash = read_graph_cache(args.graph)
    res = stage_order(g, ghash, MethodSpec(args.method, params, args.seed), args.out)
    print(res.path)
    return EXIT_OK


def cmd_eval(args) -> int:
    g, ghash = read_graph_cache(args.graph)
    ordering = files.read_ordering(g, args.ordering)
    side = files.read_sidecar(args.ordering)
    if side.get("graph_hash") not in (None, ghash):
        log.warning("ordering %s was computed on a different graph cache", args.ordering)
    prov = {k: side.get(k) for k in ("method", "params", "seed", "label")}
    city = args.city or Path(args.graph).parent.name or "city"
    stage_eval(g, ghash, ordering, args.metrics, m=_window(args, g.n), r=args.radius_m, ball=args.ball,
               jobs=args.jobs, out_path=args.out, city=city, provenance=prov)
    return EXIT_OK


def cmd_report(args) -> int:
    records = []
    for path in args.metrics:
        side = files.read_sidecar(path)
        table = files.read_metrics(path)
        city = side.get("city", "city")
        prov = side.get("ordering", {})
        label = prov.get("label") or Path(path).stem
        for metric in METRICS:
            if metric in table:
                records.append((city, label, metric, table[metric],
                                dict(prov, metric_params=side.get("metric_params", {}).get(metric, {}),
                                     graph_hash=side.get("graph_hash"))))
    normalize = None if args.normalize == "none" else args.normalize
    try:
        entries = collect_report(records, normalize, args.log)
        write_report(entries, args.out, args.log)
    except (OSError, ValueError) as exc:
        raise StageError("report", EXIT_EXPORT, str(exc)) from exc
    return EXIT_OK


def cmd_map(args) -> int:
    g, _ = read_graph_cache(args.graph)
    ranks = None
    if args.ordering:
        ordering = files.read_ordering(g, args.ordering)
        ranks = ordering.rank_of
        values = ordering.rank_of + 1
        scale = SCALES[args.scale or "order"]
    else:
        if not (args.metrics and args.column):
            raise ConfigError("map needs --ordering, or --metrics with --column")
        table = files.read_metrics(args.metrics)
        if args.column not in table:
            raise ConfigError(f"column {args.column!r} not in {args.metrics}")
        values = table[args.column]
        scale = SCALES[args.scale or "error"]
    try:
        with files.staged(args.out) as tmp:
            export_map(g, values, scale, tmp, args.format, ranks=ranks, draw_edges=not args.no_edges)
    except (OSError, ValueError) as exc:
        raise StageError("map", EXIT_EXPORT, str(exc)) from exc
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.jobs is not None:
        cfg = type(cfg)(**{**cfg.__dict__, "jobs": args.jobs})
    return run_pipeline(cfg)


def _add_metric_flags(p):
    p.add_argument("--metrics", nargs="+", choices=METRICS, default=list(METRICS))
    win = p.add_mutually_exclusive_group()
    win.add_argument("--window-frac", type=float, default=DEFAULT_WINDOW_FRAC)
    win.add_argument("--window-m", type=int)
    p.add_argument("--radius-m", type=float, default=DEFAULT_RADIUS_M)
    p.add_argument("--ball", choices=BALL_MODES, default="graph")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ucsorder", description="Order the vertices of a street graph and score the orderings.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a street graph and write graph.json")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=FORMATS, default="csv-pair")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("order", help="compute one vertex ordering")
    p.add_argument("--graph", required=True, help="graph.json cache")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--min-dist", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("eval", help="evaluate an ordering CSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--ordering", required=True)
    _add_metric_flags(p)
    p.add_argument("--city")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="metric CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summarize metric CSVs into report.csv/json and boxplots")
    p.add_argument("--metrics", nargs="+", required=True)
    p.add_argument("--normalize", choices=["none", "per-city-max"], default="none")
    p.add_argument("--log", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("map", help="color-coded map of an ordering or a metric column")
    p.add_argument("--graph", required=True)
    p.add_argument("--ordering")
    p.add_argument("--metrics")
    p.add_argument("--column", choices=METRICS)
    p.add_argument("--scale", choices=sorted(SCALES))
    p.add_argument("--format", choices=["svg", "geojson"], default="svg")
    p.add_argument("--no-edges", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("run", help="run a whole pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        log.error("%s", exc)
        return exc.code
    except ConfigError as exc:
        log.error("[config] %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("[export] %s", exc)
        return EXIT_EXPORT


if __name__ == "__main__":
    sys.exit(main())
