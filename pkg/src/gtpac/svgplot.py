"""Minimal deterministic SVG line and scatter plots.

Output depends only on the data: coordinates are printed with a fixed
number of decimals and nothing time- or locale-dependent is embedded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from html import escape
from typing import Sequence

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#17becf",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#000000",
)


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    style: str = "line"  # "line", "scatter" or "dashed"
    color: str | None = None


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    xlog: bool = False
    ylog: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(v))}"
    if v != 0 and (abs(v) >= 1e5 or abs(v) < 1e-3):
        return f"{v:.1e}"
    return f"{v:.6g}"


def _finite_points(s: Series, panel: Panel):
    pts = []
    for x, y in zip(s.x, s.y):
        x, y = float(x), float(y)
        if panel.xlog:
            x = math.log10(x) if x > 0 else math.nan
        if panel.ylog:
            y = math.log10(y) if y > 0 else math.nan
        if math.isfinite(x) and math.isfinite(y):
            pts.append((x, y))
    return pts


def _render_panel(panel: Panel, ox: float, oy: float, w: float, h: float) -> list[str]:
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = w - left - right, h - top - bottom
    all_pts = [pt for s in panel.series for pt in _finite_points(s, panel)]
    out = [f'<g transform="translate({_fmt(ox)},{_fmt(oy)})">']
    out.append(
        f'<text x="{_fmt(w / 2)}" y="18" text-anchor="middle" font-size="14">{escape(panel.title)}</text>'
    )
    if not all_pts:
        out.append(f'<text x="{_fmt(w / 2)}" y="{_fmt(h / 2)}" text-anchor="middle">no data</text></g>')
        return out
    xs, ys = [p[0] for p in all_pts], [p[1] for p in all_pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out.append(
        f'<rect x="{left}" y="{top}" width="{_fmt(pw)}" height="{_fmt(ph)}" fill="none" stroke="#000"/>'
    )
    for t in _nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{_fmt(X)}" y1="{_fmt(top + ph)}" x2="{_fmt(X)}" y2="{_fmt(top + ph + 5)}" stroke="#000"/>')
        out.append(
            f'<text x="{_fmt(X)}" y="{_fmt(top + ph + 18)}" text-anchor="middle" font-size="11">'
            f"{_tick_label(t, panel.xlog)}</text>"
        )
    for t in _nice_ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{left - 5}" y1="{_fmt(Y)}" x2="{left}" y2="{_fmt(Y)}" stroke="#000"/>')
        out.append(
            f'<text x="{left - 8}" y="{_fmt(Y + 4)}" text-anchor="end" font-size="11">'
            f"{_tick_label(t, panel.ylog)}</text>"
        )
    out.append(
        f'<text x="{_fmt(left + pw / 2)}" y="{_fmt(h - 10)}" text-anchor="middle" font-size="12">'
        f"{escape(panel.xlabel)}</text>"
    )
    out.append(
        f'<text x="15" y="{_fmt(top + ph / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {_fmt(top + ph / 2)})">{escape(panel.ylabel)}</text>'
    )
    for i, s in enumerate(panel.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = _finite_points(s, panel)
        if not pts:
            continue
        if s.style == "scatter":
            for x, y in pts:
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.5" fill="{color}"/>')
        else:
            dash = ' stroke-dasharray="6,4"' if s.style == "dashed" else ""
            path = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        ly = top + 12 + 14 * i
        out.append(f'<rect x="{_fmt(left + pw - 150)}" y="{_fmt(ly - 8)}" width="10" height="10" fill="{color}"/>')
        out.append(
            f'<text x="{_fmt(left + pw - 135)}" y="{_fmt(ly + 1)}" font-size="10">{escape(s.label)}</text>'
        )
    out.append("</g>")
    return out


def render(panels: Sequence[Panel], panel_width: int = 480, panel_height: int = 360) -> str:
    """Lay panels out side by side and return the SVG document."""
    width = panel_width * len(panels)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{panel_height}" '
        f'viewBox="0 0 {width} {panel_height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{panel_height}" fill="#fff"/>',
    ]
    for i, panel in enumerate(panels):
        lines.extend(_render_panel(panel, i * panel_width, 0, panel_width, panel_height))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
