"""Minimal native SVG line plots (linear or log axes)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

__all__ = ["line_plot"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def _transform(vals, log):
    if log:
        return [math.log10(v) if v > 0 else None for v in vals]
    return [v if math.isfinite(v) else None for v in vals]


def line_plot(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False, width: int = 480, height: int = 320) -> str:
    """Render ``{label: (xs, ys)}`` as an SVG document string.

    Non-finite points (and non-positive ones on log axes) are skipped.
    Output is deterministic for identical input.
    """
    ml, mr, mt, mb = 64, 16, 28, 44
    pw, ph = width - ml - mr, height - mt - mb
    pts = {}
    for label in sorted(series):
        xs, ys = series[label]
        tx, ty = _transform([float(v) for v in xs], logx), _transform([float(v) for v in ys], logy)
        pts[label] = [(a, b) for a, b in zip(tx, ty) if a is not None and b is not None]
    allx = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ally = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        lx = _fmt(10 ** fx) if logx else _fmt(fx)
        ly = _fmt(10 ** fy) if logy else _fmt(fy)
        out.append(f'<text x="{X(fx):.2f}" y="{mt + ph + 14}" text-anchor="middle">{lx}</text>')
        out.append(f'<text x="{ml - 4}" y="{Y(fy) + 4:.2f}" text-anchor="end">{ly}</text>')
    out.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="12" y="{mt + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 12 {mt + ph / 2:.2f})">{escape(ylabel)}</text>')
    out.append(f'<text x="{ml + pw / 2:.2f}" y="16" text-anchor="middle">{escape(title)}</text>')
    for i, (label, p) in enumerate(pts.items()):
        color = _COLORS[i % len(_COLORS)]
        if p:
            path = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in p)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 14 + 13 * i}" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
