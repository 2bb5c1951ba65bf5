"""Minimal SVG line charts for information-flow traces."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

log = logging.getLogger(__name__)

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


@dataclass
class Series:
    label: str
    x: np.ndarray
    mean: np.ndarray
    low: np.ndarray | None = None
    high: np.ndarray | None = None


@dataclass
class Chart:
    title: str
    x_label: str
    y_label: str
    series: list[Series] = field(default_factory=list)
    hlines: list[tuple[float, str]] = field(default_factory=list)
    y_floor: float | None = None
    width: int = 640
    height: int = 400


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, count)


def render_svg(chart: Chart) -> str:
    left, right, top, bottom = 60, 120, 30, 45
    w, h = chart.width, chart.height
    pw, ph = w - left - right, h - top - bottom

    xs = np.concatenate([s.x for s in chart.series]) if chart.series else np.array([0.0])
    ys = [s.mean for s in chart.series]
    ys += [s.low for s in chart.series if s.low is not None]
    ys += [s.high for s in chart.series if s.high is not None]
    yv = np.concatenate(ys) if ys else np.array([0.0])
    yv = np.concatenate([yv, [v for v, _ in chart.hlines]])
    if chart.y_floor is not None:
        yv = np.append(yv, chart.y_floor)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(yv.min()), float(yv.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y1 += pad
    if chart.y_floor is None or y0 < chart.y_floor:
        y0 -= pad

    def px(x):
        return left + (np.asarray(x, dtype=float) - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (np.asarray(y, dtype=float) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
           f'<text x="{w / 2:.1f}" y="18" text-anchor="middle" font-size="13">'
           f'{escape(chart.title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.1f}" y1="{top + ph}" x2="{px(t):.1f}" '
                   f'y2="{top + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{px(t):.1f}" y="{top + ph + 16}" text-anchor="middle">'
                   f'{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 4}" y1="{py(t):.1f}" x2="{left}" y2="{py(t):.1f}" '
                   f'stroke="#444"/>')
        out.append(f'<text x="{left - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{h - 8}" text-anchor="middle">'
               f'{escape(chart.x_label)}</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(chart.y_label)}</text>')

    for i, s in enumerate(chart.series):
        color = PALETTE[i % len(PALETTE)]
        if s.low is not None and s.high is not None:
            pts = list(zip(px(s.x), py(s.high))) + list(zip(px(s.x[::-1]), py(s.low[::-1])))
            out.append('<polygon points="' + " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
                       + f'" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        if len(s.x) == 1:
            out.append(f'<circle cx="{px(s.x)[0]:.1f}" cy="{py(s.mean)[0]:.1f}" r="3" '
                       f'fill="{color}"/>')
        else:
            pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(px(s.x), py(s.mean)))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"/>')
        ly = top + 12 + 16 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly + 4}">{escape(s.label)}</text>')

    for value, label in chart.hlines:
        out.append(f'<line x1="{left}" y1="{py(value):.1f}" x2="{left + pw}" '
                   f'y2="{py(value):.1f}" stroke="#666" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{left + pw - 4}" y="{py(value) - 4:.1f}" text-anchor="end" '
                   f'fill="#666">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(chart: Chart, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(render_svg(chart), encoding="utf-8")
    return path
