"""Minimal deterministic SVG line plots.

Only what the run reports need: polylines and markers on linear or
logarithmic axes, a title, axis labels, a few ticks and a legend.  Output
depends only on the data, so identical runs give identical files.
"""

from __future__ import annotations

import math
from html import escape
from pathlib import Path

WIDTH, HEIGHT = 640, 440
MARGIN = {"left": 80, "right": 170, "top": 40, "bottom": 60}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, log: bool):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 6)
        return [(float(e), f"1e{e}") for e in range(a, b + 1, step) if lo - 1e-9 <= e <= hi + 1e-9]
    if hi == lo:
        return [(lo, f"{lo:.3g}")]
    raw = (hi - lo) / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-12 * max(1.0, abs(hi)):
        out.append((v, f"{v:.3g}"))
        v += step
    return out


def line_plot(path, series, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False) -> Path:
    """Write an SVG with one polyline per series.

    ``series`` is a list of dicts with keys ``label``, ``x``, ``y`` and
    optionally ``dashed`` (bool) and ``markers`` (bool, default True).
    Nonpositive values are dropped on logarithmic axes, as are non-finite
    values everywhere.
    """
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    clean = []
    for s in series:
        pts = [(tx(float(x)), ty(float(y))) for x, y in zip(s["x"], s["y"])
               if math.isfinite(x) and math.isfinite(y)
               and (not logx or x > 0) and (not logy or y > 0)]
        clean.append((s, pts))
    allpts = [p for _, pts in clean for p in pts] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in allpts), max(p[0] for p in allpts)
    y0, y1 = min(p[1] for p in allpts), max(p[1] for p in allpts)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def X(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
           f'fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    for v, lab in _ticks(x0, x1, logx):
        out.append(f'<line x1="{_fmt(X(v))}" y1="{MARGIN["top"] + ph}" x2="{_fmt(X(v))}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(X(v))}" y="{MARGIN["top"] + ph + 18}" '
                   f'text-anchor="middle">{escape(lab)}</text>')
    for v, lab in _ticks(y0, y1, logy):
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{_fmt(Y(v))}" x2="{MARGIN["left"]}" '
                   f'y2="{_fmt(Y(v))}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{_fmt(Y(v) + 4)}" '
                   f'text-anchor="end">{escape(lab)}</text>')
    if xlabel:
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="{HEIGHT - 15}" '
                   f'text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        cy = MARGIN["top"] + ph / 2
        out.append(f'<text x="18" y="{cy:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {cy:.2f})">{escape(ylabel)}</text>')
    for i, (s, pts) in enumerate(clean):
        color = COLORS[i % len(COLORS)]
        dash = ' stroke-dasharray="6 4"' if s.get("dashed") else ""
        if len(pts) > 1:
            coords = " ".join(f"{_fmt(X(a))},{_fmt(Y(b))}" for a, b in pts)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"{dash}/>')
        if s.get("markers", True):
            for a, b in pts:
                out.append(f'<circle cx="{_fmt(X(a))}" cy="{_fmt(Y(b))}" r="3" fill="{color}"/>')
        ly = MARGIN["top"] + 16 + 18 * i
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(str(s.get("label", "")))}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
