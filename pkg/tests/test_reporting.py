import csv
import json
import re
import statistics
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import path_graph
from ucsorder.graph import build_graph
from ucsorder.reporting import (ERROR_SCALE, ORDER_SCALE, STAT_FIELDS, BoxplotStats, ColorScale, ExportError,
                                ReportEntry, boxplot_layout, export_boxplot_svg, export_map, export_report,
                                log_scale, normalize_per_city, render_boxplot_svg, render_map_svg, summarize)

SVG = "{http://www.w3.org/2000/svg}"
finite = st.floats(-1e6, 1e6, allow_nan=False)


# ---------------------------------------------------------------------------
# summarize
# ---------------------------------------------------------------------------

def test_summarize_one_to_five():
    s = summarize([1, 2, 3, 4, 5])
    assert (s.q1, s.median, s.q3) == (2, 3, 4)
    assert s.outliers == ()
    assert (s.lower_whisker, s.upper_whisker) == (1, 5)


def test_summarize_constant():
    s = summarize([1, 1, 1, 1])
    assert s.q1 == s.median == s.q3 == 1 and s.iqr == 0 and s.outliers == ()


def test_summarize_outlier():
    s = summarize([1, 2, 3, 4, 100])
    assert s.outliers == (100.0,)
    assert s.upper_whisker == 4


def test_summarize_matches_reference_quantiles():
    v = np.random.default_rng(2024).lognormal(0.0, 1.0, 1000)
    ref = statistics.quantiles(v.tolist(), n=4, method="inclusive")
    s = summarize(v)
    assert s.q1 == pytest.approx(ref[0], abs=1e-9)
    assert s.median == pytest.approx(ref[1], abs=1e-9)
    assert s.q3 == pytest.approx(ref[2], abs=1e-9)
    assert s.mean == pytest.approx(statistics.fmean(v.tolist()), abs=1e-9)


def test_summarize_rejects_bad_input():
    with pytest.raises(ValueError):
        summarize([])
    with pytest.raises(ValueError):
        summarize([1.0, float("nan")])


@given(st.lists(finite, min_size=1, max_size=60), st.randoms())
def test_summarize_invariants(values, rnd):
    s = summarize(values)
    assert s.min <= s.q1 <= s.median <= s.q3 <= s.max
    assert s.lower_whisker >= s.q1 - 1.5 * s.iqr - 1e-9 * max(1, abs(s.q1))
    assert s.upper_whisker <= s.q3 + 1.5 * s.iqr + 1e-9 * max(1, abs(s.q3))
    assert s.lower_whisker in values and s.upper_whisker in values
    assert all(o < s.lower_whisker or o > s.upper_whisker for o in s.outliers)
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert summarize(shuffled) == s


# ---------------------------------------------------------------------------
# normalization and log scale
# ---------------------------------------------------------------------------

def test_normalize_per_city():
    out = normalize_per_city({
        ("A", "m1", "geo_fwd"): [4.0, 2.0],
        ("A", "m2", "geo_fwd"): [10.0, 5.0],
        ("A", "m1", "topo_inv"): [3.0],
        ("B", "m1", "geo_fwd"): [0.0, 0.0],
    })
    assert out["A", "m1", "geo_fwd"].tolist() == [0.4, 0.2]
    assert out["A", "m2", "geo_fwd"].max() == 1.0
    assert out["A", "m1", "topo_inv"].tolist() == [1.0]
    assert out["B", "m1", "geo_fwd"].tolist() == [0.0, 0.0]


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30), st.lists(st.floats(0, 1e6), min_size=1, max_size=30))
def test_normalize_monotone_and_bounded(a, b):
    out = normalize_per_city({("c", "x", "m"): a, ("c", "y", "m"): b})
    for key, raw in ((("c", "x", "m"), a), (("c", "y", "m"), b)):
        v = out[key]
        assert np.all((v >= 0) & (v <= 1))
        assert np.array_equal(np.argsort(v, kind="stable"), np.argsort(raw, kind="stable"))


def test_log_scale():
    assert log_scale([1, 100, 0]).tolist() == [0.0, 2.0, -9.0]
    with pytest.raises(ValueError):
        log_scale([-1.0])


# ---------------------------------------------------------------------------
# colors and maps
# ---------------------------------------------------------------------------

def test_color_scales():
    assert ORDER_SCALE(0.0) == "#00008B"
    assert ORDER_SCALE(0.5) == "#2E8B57"
    assert ORDER_SCALE(1.0) == "#FF0000"
    assert ERROR_SCALE(0.0) == "#F5F5DC"
    assert ERROR_SCALE(1.0) == "#FF0000"
    with pytest.raises(ValueError):
        ColorScale("bad", ("#000000", "#FFFFFF"), (0.0, 0.9))


def _fills(svg):
    root = ET.fromstring(svg)
    return [c.get("fill") for c in root.iter(SVG + "circle")]


def test_map_constant_values_use_first_color():
    g = path_graph(4, 10.0)
    assert set(_fills(render_map_svg(g, [3.0] * 4, ORDER_SCALE))) == {"#00008B"}


def test_map_two_nodes_endpoints():
    g = path_graph(2, 10.0)
    root = ET.fromstring(render_map_svg(g, [0.0, 1.0], ORDER_SCALE))
    fills = {c.get("data-value"): c.get("fill") for c in root.iter(SVG + "circle")}
    assert fills == {"0.0": "#00008B", "1.0": "#FF0000"}


def test_map_y_axis_flipped():
    g = build_graph(["s", "n"], [(0.0, 0.0), (0.001, 0.0)], [(0, 1, None)])
    root = ET.fromstring(render_map_svg(g, [0.0, 1.0], ORDER_SCALE, draw_edges=False))
    cy = {c.get("data-id"): float(c.get("cy")) for c in root.iter(SVG + "circle")}
    assert cy["n"] < cy["s"]
    assert not list(root.iter(SVG + "polyline"))


def test_geojson_round_trip(tmp_path):
    raw = [(-23.5505, -46.6333), (-23.5510, -46.6340), (-23.5499, -46.6321)]
    g = build_graph(["a", "b", "c"], raw, [(0, 1, None), (1, 2, None)])
    out = export_map(g, [1.0, 2.0, 3.0], ORDER_SCALE, tmp_path / "m.geojson", "geojson", ranks=np.array([2, 0, 1]))
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["type"] == "FeatureCollection" and len(doc["features"]) == 3
    for f, (lat, lon) in zip(doc["features"], raw):
        assert f["type"] == "Feature" and f["geometry"]["type"] == "Point"
        x, y = f["geometry"]["coordinates"]
        assert abs(x - lon) <= 1e-7 and abs(y - lat) <= 1e-7
        assert set(f["properties"]) == {"id", "value", "rank"}
    assert [f["properties"]["rank"] for f in doc["features"]] == [3, 1, 2]


def test_map_byte_stable(tmp_path):
    g = path_graph(30, 7.0)
    vals = np.random.default_rng(1).uniform(size=30)
    for fmt in ("svg", "geojson"):
        a = export_map(g, vals, ERROR_SCALE, tmp_path / f"a.{fmt}", fmt).read_bytes()
        b = export_map(g, vals, ERROR_SCALE, tmp_path / f"b.{fmt}", fmt).read_bytes()
        assert a == b


def test_map_errors(tmp_path):
    g = path_graph(3)
    with pytest.raises(ValueError):
        export_map(g, [1.0, 2.0], ORDER_SCALE, tmp_path / "x.svg")
    with pytest.raises(ValueError):
        export_map(g, [1.0, 2.0, 3.0], ORDER_SCALE, tmp_path / "x.png", "png")
    (tmp_path / "blocker").write_text("", encoding="utf-8")
    with pytest.raises(ExportError):
        export_map(g, [1.0, 2.0, 3.0], ORDER_SCALE, tmp_path / "blocker" / "x.svg")


# ---------------------------------------------------------------------------
# boxplots
# ---------------------------------------------------------------------------

def test_boxplot_coordinates():
    stats = {"m": summarize([1, 2, 3, 4, 5])}
    root = ET.fromstring(render_boxplot_svg(stats))
    lay = boxplot_layout(stats, True)
    box = [r for r in root.iter(SVG + "rect") if r.get("class") == "box"][0]
    assert float(box.get("data-q1")) == 2 and float(box.get("data-q3")) == 4
    assert float(box.get("y")) == pytest.approx(lay.y(4), abs=0.01)
    assert float(box.get("y")) + float(box.get("height")) == pytest.approx(lay.y(2), abs=0.02)
    med = [ln for ln in root.iter(SVG + "line") if ln.get("class") == "median"][0]
    assert float(med.get("data-value")) == 3
    assert float(med.get("y1")) == pytest.approx(lay.y(3), abs=0.01)


def test_boxplot_outlier_toggle(tmp_path):
    stats = {"m": summarize([1, 2, 3, 4, 100])}
    with_o = export_boxplot_svg(stats, tmp_path / "a.svg").read_text(encoding="utf-8")
    without = export_boxplot_svg(stats, tmp_path / "b.svg", with_outliers=False).read_text(encoding="utf-8")
    assert with_o.count('class="outlier"') == 1
    assert 'class="outlier"' not in without


def test_boxplot_groups_in_order():
    labels = ["umap", "fiedler", "tsne", "random", "original"]
    rng = np.random.default_rng(0)
    stats = {lbl: summarize(rng.uniform(size=20)) for lbl in labels}
    root = ET.fromstring(render_boxplot_svg(stats))
    groups = [g.get("data-label") for g in root.iter(SVG + "g") if g.get("class") == "box-group"]
    assert groups == labels


def test_boxplot_needs_a_method():
    with pytest.raises(ValueError):
        render_boxplot_svg({})


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_report_empty(tmp_path):
    out, js = export_report([], tmp_path / "r.csv", tmp_path / "r.json")
    assert out.read_text(encoding="utf-8") == "city,method,metric,stat,value\n"
    assert json.loads(js.read_text(encoding="utf-8")) == []


def test_report_one_cell(tmp_path):
    e = ReportEntry("sp", "fiedler", "geo_fwd", summarize([1, 2, 3]), {"params": {}, "seed": None})
    out, js = export_report([e], tmp_path / "r.csv", tmp_path / "r.json")
    rows = _rows(out)[1:]
    assert {tuple(r[:3]) for r in rows} == {("sp", "fiedler", "geo_fwd")}
    assert [r[3] for r in rows] == list(STAT_FIELDS) + ["n_outliers"]
    assert dict((r[3], float(r[4])) for r in rows)["median"] == 2.0
    doc = json.loads(js.read_text(encoding="utf-8"))
    assert doc[0]["provenance"] == {"params": {}, "seed": None}


def test_report_full_grid(tmp_path):
    rng = np.random.default_rng(0)
    entries = [ReportEntry("sp", meth, met, summarize(rng.uniform(size=10)), {})
               for meth in ("fiedler", "tsne", "umap", "original", "random")
               for met in ("geo_fwd", "geo_inv", "topo_fwd", "topo_inv")]
    out, _ = export_report(entries, tmp_path / "r.csv")
    assert len({tuple(r[:3]) for r in _rows(out)[1:]}) == 20


def test_stats_dict_round_trip():
    s = summarize([5.0, 1.0, 2.0, 40.0])
    d = s.as_dict()
    assert BoxplotStats(**{**d, "outliers": tuple(d["outliers"])}) == s
    assert re.fullmatch(r"[\d.]+", repr(d["median"]))
