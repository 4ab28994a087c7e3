"""Deterministic SVG scatter plots of Pareto fronts (log-scaled F axis)."""

from __future__ import annotations

import json
import math
from pathlib import Path

from rydpulse import io

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 150, 30, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2")


class PlotError(ValueError):
    pass


def _label_for(path: Path) -> str:
    manifest = path.parent / "manifest.json"
    if manifest.exists():
        try:
            level = json.loads(manifest.read_text())["config"]["noise"]["noise_level"]
            return f"noise {100 * float(level):g}%"
        except (KeyError, ValueError, TypeError):
            pass
    return path.stem


def _log_ticks(lo: float, hi: float) -> list[float]:
    return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1) if lo <= k <= hi]


def _linear_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_svg(series: list[tuple[str, list[tuple[float, float]]]]) -> str:
    """SVG text for ``[(label, [(F, G), ...]), ...]``."""
    points = [p for _, pts in series for p in pts]
    if not points:
        raise PlotError("nothing to plot")
    fs = [max(f, 1e-300) for f, _ in points]
    gs = [g for _, g in points]
    lf_lo, lf_hi = math.log10(min(fs)), math.log10(max(fs))
    pad = max(0.1 * (lf_hi - lf_lo), 0.1)
    lf_lo, lf_hi = lf_lo - pad, lf_hi + pad
    g_lo, g_hi = min(gs), max(gs)
    gpad = max(0.05 * (g_hi - g_lo), 0.05 * max(abs(g_hi), 1e-3))
    g_lo, g_hi = g_lo - gpad, g_hi + gpad

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(f):
        return MARGIN_L + (math.log10(max(f, 1e-300)) - lf_lo) / (lf_hi - lf_lo) * pw

    def sy(g):
        return MARGIN_T + (1 - (g - g_lo) / (g_hi - g_lo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    ticks = _log_ticks(lf_lo, lf_hi) or [10.0 ** round(0.5 * (lf_lo + lf_hi))]
    for t in ticks:
        x = sx(t)
        if MARGIN_L <= x <= MARGIN_L + pw:
            out.append(f'<line x1="{_fmt(x)}" y1="{MARGIN_T + ph}" x2="{_fmt(x)}" y2="{MARGIN_T + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{_fmt(x)}" y="{MARGIN_T + ph + 20}" text-anchor="middle">1e{round(math.log10(t))}</text>')
    for t in _linear_ticks(g_lo, g_hi):
        y = sy(t)
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_fmt(y)}" x2="{MARGIN_L}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_fmt(y + 4)}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">infidelity F (log scale)</text>')
    out.append(
        f'<text x="20" y="{MARGIN_T + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 20 {MARGIN_T + ph / 2:.2f})">Rydberg time G</text>'
    )
    for k, (label, pts) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        out.append(f'<g fill="{color}" stroke="none">')
        for f, g in sorted(pts):
            out.append(f'<circle cx="{_fmt(sx(f))}" cy="{_fmt(sy(g))}" r="3"/>')
        out.append("</g>")
        ly = MARGIN_T + 15 + 20 * k
        lx = MARGIN_L + pw + 15
        out.append(f'<circle cx="{lx}" cy="{ly - 4}" r="4" fill="{color}"/>')
        out.append(f'<text x="{lx + 10}" y="{ly}">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def plot_front(front_csvs, output_svg, labels=None) -> Path:
    """Overlay one or more front CSV files into ``output_svg``."""
    if isinstance(front_csvs, (str, Path)):
        front_csvs = [front_csvs]
    paths = [Path(p) for p in front_csvs]
    if labels is None:
        labels = [_label_for(p) for p in paths]
    series = []
    for path, label in zip(paths, labels):
        rows = io.read_front(path)
        if not rows:
            raise PlotError(f"{path}: front file has no rows")
        series.append((label, [(r["F"], r["G"]) for r in rows]))
    out = Path(output_svg)
    out.write_text(render_svg(series))
    return out
