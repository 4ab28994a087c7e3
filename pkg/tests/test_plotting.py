import json
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rydpulse import io
from rydpulse.plotting import PlotError, plot_front, render_svg


def write_front(path, points):
    pts = np.array(points, dtype=float)
    io.write_front(path, np.zeros((len(pts), 3)), pts, np.zeros_like(pts), np.zeros(len(pts), dtype=int))
    return path


def circles(svg_text):
    root = ET.fromstring(svg_text)
    return [c for c in root.iter("{http://www.w3.org/2000/svg}circle") if c.get("r") == "3"]


def test_svg_is_valid_and_has_one_marker_per_point():
    svg = render_svg([("a", [(1e-3, 0.2), (1e-2, 0.1)]), ("b", [(5e-3, 0.3)])])
    assert len(circles(svg)) == 3
    assert "log scale" in svg


def test_f_axis_is_logarithmic():
    svg = render_svg([("a", [(1e-4, 0.1), (1e-3, 0.1), (1e-2, 0.1)])])
    xs = [float(c.get("cx")) for c in circles(svg)]
    assert xs[1] - xs[0] == pytest.approx(xs[2] - xs[1], abs=0.02)
    assert re.search(r">1e-3<", svg)


def test_rendering_is_deterministic(tmp_path):
    f = write_front(tmp_path / "front.csv", [(0.01, 0.5), (0.02, 0.3)])
    a = plot_front(f, tmp_path / "a.svg").read_bytes()
    b = plot_front(f, tmp_path / "b.svg").read_bytes()
    assert a == b


def test_labels_from_manifest(tmp_path):
    d = tmp_path / "run"
    d.mkdir()
    (d / "manifest.json").write_text(json.dumps({"config": {"noise": {"noise_level": 0.2}}}))
    f = write_front(d / "front.csv", [(0.01, 0.5)])
    svg = plot_front(f, tmp_path / "x.svg").read_text()
    assert "noise 20%" in svg
    svg = plot_front(f, tmp_path / "y.svg", labels=["mine"]).read_text()
    assert "mine" in svg


def test_empty_front_is_an_error(tmp_path):
    f = write_front(tmp_path / "front.csv", np.empty((0, 2)))
    with pytest.raises(PlotError):
        plot_front(f, tmp_path / "x.svg")


def test_front_writer_rejects_dominated_rows(tmp_path):
    with pytest.raises(io.NonDominanceError):
        write_front(tmp_path / "bad.csv", [(0.1, 0.1), (0.2, 0.2)])


def test_front_round_trip(tmp_path):
    pts = [(0.0123456789012345, 0.9), (0.1, 0.1)]
    rows = io.read_front(write_front(tmp_path / "f.csv", pts))
    assert [(r["F"], r["G"]) for r in rows] == pts


def test_single_point_and_overlay(tmp_path):
    svg = render_svg([("only", [(0.01, 0.5)])])
    assert len(circles(svg)) == 1
    fronts = [write_front(tmp_path / f"f{i}.csv", [(0.01 * (i + 1), 0.5)]) for i in range(3)]
    svg = plot_front(fronts, tmp_path / "all.svg", labels=["a", "b", "c"]).read_text()
    legend = [c for c in ET.fromstring(svg).iter("{http://www.w3.org/2000/svg}circle") if c.get("r") == "4"]
    assert len(legend) == 3
