"""Minimal static SVG line charts (no plotting library needed).

Output is a pure function of the input numbers, so plots are byte-stable
across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


def _panel(series: Sequence[Series], x0, y0, w, h, title, x_label, y_label, log_y) -> list[str]:
    out = []
    xs = np.concatenate([np.asarray(s.x, float) for s in series])
    ys = np.concatenate([np.asarray(s.y, float) for s in series])
    keep = np.isfinite(ys) & ((ys > 0) if log_y else True)
    if not keep.any():
        ys_used = np.array([1.0])
    else:
        ys_used = ys[keep]
    x_lo, x_hi = float(np.nanmin(xs)), float(np.nanmax(xs))
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if log_y:
        y_lo = math.floor(math.log10(ys_used.min()))
        y_hi = math.ceil(math.log10(ys_used.max()))
        if y_hi == y_lo:
            y_hi += 1
    else:
        y_lo, y_hi = float(ys_used.min()), float(ys_used.max())
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    def px(x):
        return x0 + (x - x_lo) / (x_hi - x_lo) * w

    def py(y):
        v = math.log10(y) if log_y else y
        return y0 + h - (v - y_lo) / (y_hi - y_lo) * h

    out.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#000"/>')
    out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{y0 - 8}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(
        f'<text x="{_fmt(x0 + w / 2)}" y="{y0 + h + 34}" text-anchor="middle" font-size="12">{escape(x_label)}</text>'
    )
    out.append(
        f'<text x="{x0 - 48}" y="{_fmt(y0 + h / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 {x0 - 48} {_fmt(y0 + h / 2)})">{escape(y_label)}</text>'
    )
    for xt in np.linspace(x_lo, x_hi, 6):
        out.append(f'<line x1="{_fmt(px(xt))}" y1="{y0 + h}" x2="{_fmt(px(xt))}" y2="{y0 + h + 4}" stroke="#000"/>')
        out.append(
            f'<text x="{_fmt(px(xt))}" y="{y0 + h + 16}" text-anchor="middle" font-size="10">{_tick_label(xt)}</text>'
        )
    if log_y:
        y_ticks = [10.0**e for e in range(int(y_lo), int(y_hi) + 1)]
    else:
        y_ticks = list(np.linspace(y_lo, y_hi, 5))
    for yt in y_ticks:
        out.append(f'<line x1="{x0 - 4}" y1="{_fmt(py(yt))}" x2="{x0 + w}" y2="{_fmt(py(yt))}" stroke="#ddd"/>')
        out.append(
            f'<text x="{x0 - 6}" y="{_fmt(py(yt) + 3)}" text-anchor="end" font-size="10">{_tick_label(yt)}</text>'
        )
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = [
            (px(x), py(y))
            for x, y in zip(s.x, s.y)
            if math.isfinite(x) and math.isfinite(y) and (y > 0 or not log_y)
        ]
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        if len(pts) > 1:
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
        for a, b in pts:
            out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2.5" fill="{color}"/>')
        ly = y0 + 14 + 15 * k
        out.append(
            f'<line x1="{x0 + w - 120}" y1="{ly}" x2="{x0 + w - 100}" y2="{ly}" stroke="{color}" stroke-width="1.6"{dash}/>'
        )
        out.append(f'<text x="{x0 + w - 95}" y="{ly + 4}" font-size="10">{escape(s.label)}</text>')
    return out


def line_chart_svg(
    panels: Sequence[tuple[str, Sequence[Series]]],
    x_label: str,
    y_labels: Sequence[str],
    log_y: bool = True,
) -> str:
    """Side-by-side panels sharing an x label; one ``(title, series)`` per panel."""
    w, h, margin = 360, 260, 70
    width = margin + len(panels) * (w + margin)
    height = h + 90
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="#fff"/>',
    ]
    for k, ((title, series), y_label) in enumerate(zip(panels, y_labels)):
        parts.extend(_panel(series, margin + k * (w + margin), 30, w, h, title, x_label, y_label, log_y))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
