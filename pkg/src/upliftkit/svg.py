"""Standalone SVG charts: line chart, bar chart and heatmap.

Output is plain text with fixed number formatting so that identical inputs
give byte-identical documents.
"""

from __future__ import annotations

import colorsys
import math
from html import escape
from typing import Sequence

WIDTH, HEIGHT = 800, 500
MARGIN = {"left": 80, "right": 30, "top": 50, "bottom": 70}


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, title: str):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]
        if title:
            self.text(WIDTH / 2, 28, title, size=16, anchor="middle")

    def text(self, x, y, s, size=12, anchor="start", rotate=None):
        tr = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate is not None else ""
        self.parts.append(
            f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" text-anchor="{anchor}"{tr}>{escape(str(s))}</text>'
        )

    def line(self, x1, y1, x2, y2, stroke="black", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" stroke="{stroke}" stroke-width="{width}"{d}/>'
        )

    def polyline(self, pts, stroke, width=2.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self.parts.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width}"{d}/>')

    def rect(self, x, y, w, h, fill, stroke="none", title=None):
        body = f"<title>{escape(title)}</title>" if title else ""
        self.parts.append(
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{fill}" stroke="{stroke}">{body}</rect>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


class _Axes:
    def __init__(self, canvas, xlim, ylim):
        self.c = canvas
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
        self.xlim, self.ylim = xlim, ylim

    def X(self, v):
        a, b = self.xlim
        return self.x0 + (v - a) / (b - a) * (self.x1 - self.x0)

    def Y(self, v):
        a, b = self.ylim
        return self.y0 - (v - a) / (b - a) * (self.y0 - self.y1)

    def frame(self, xlabel, ylabel, xticks=True):
        c = self.c
        for t in _nice_ticks(*self.ylim):
            y = self.Y(t)
            c.line(self.x0, y, self.x1, y, stroke="#dddddd")
            c.text(self.x0 - 6, y + 4, f"{t:g}", anchor="end")
        if xticks:
            for t in _nice_ticks(*self.xlim):
                x = self.X(t)
                c.line(x, self.y0, x, self.y0 + 5)
                c.text(x, self.y0 + 18, f"{t:g}", anchor="middle")
        c.line(self.x0, self.y0, self.x1, self.y0)
        c.line(self.x0, self.y0, self.x0, self.y1)
        c.text((self.x0 + self.x1) / 2, HEIGHT - 25, xlabel, size=13, anchor="middle")
        c.text(22, (self.y0 + self.y1) / 2, ylabel, size=13, anchor="middle", rotate=-90)


def _padded(lo, hi):
    if hi == lo:
        return lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def line_chart(series: Sequence[tuple[str, Sequence[tuple[float, float]], str]], title="", xlabel="", ylabel="") -> str:
    """``series`` is a list of ``(label, points, color)``; dashed if label starts with '~'."""
    xs = [x for _, pts, _ in series for x, _ in pts]
    ys = [y for _, pts, _ in series for _, y in pts]
    c = _Canvas(title)
    ax = _Axes(c, (min(xs), max(xs)), _padded(min(ys + [0.0]), max(ys + [0.0])))
    ax.frame(xlabel, ylabel)
    for k, (label, pts, color) in enumerate(series):
        dashed = label.startswith("~")
        c.polyline([(ax.X(x), ax.Y(y)) for x, y in pts], stroke=color, dash="6,4" if dashed else None)
        ly = MARGIN["top"] + 16 * k + 8
        c.line(ax.x1 - 150, ly, ax.x1 - 125, ly, stroke=color, width=2.0, dash="6,4" if dashed else None)
        c.text(ax.x1 - 120, ly + 4, label.lstrip("~"))
    return c.render()


def bar_chart(labels: Sequence[str], values: Sequence[float], title="", xlabel="", ylabel="", color="#d9534f") -> str:
    finite = [v for v in values if not math.isnan(v)]
    c = _Canvas(title)
    ax = _Axes(c, (0.0, float(len(values))), _padded(min(finite + [0.0]), max(finite + [0.0])))
    ax.frame(xlabel, ylabel, xticks=False)
    zero = ax.Y(0.0)
    for k, (lab, v) in enumerate(zip(labels, values)):
        x = ax.X(k + 0.1)
        w = ax.X(k + 0.9) - x
        if not math.isnan(v):
            top = ax.Y(v)
            c.rect(x, min(top, zero), w, abs(zero - top), fill=color, stroke="#333333", title=f"{lab}: {v:.4g}")
        c.text(x + w / 2, ax.y0 + 18, lab, size=11, anchor="middle")
    c.line(ax.x0, zero, ax.x1, zero)
    return c.render()


def uplift_color(frac: float) -> str:
    """Rainbow scale: 0 (lowest uplift) is red, 1 (highest) is blue."""
    frac = min(max(frac, 0.0), 1.0)
    r, g, b = colorsys.hsv_to_rgb(frac * 2.0 / 3.0, 0.85, 0.95)
    return f"#{round(r * 255):02x}{round(g * 255):02x}{round(b * 255):02x}"


def heatmap(values, edges_x, edges_y, title="", xlabel="", ylabel="") -> str:
    """Heatmap of a (bx, by) matrix; NaN cells are drawn grey."""
    bx, by = len(edges_x) - 1, len(edges_y) - 1
    finite = [float(v) for row in values for v in row if not math.isnan(float(v))]
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    c = _Canvas(title)
    ax = _Axes(c, (float(edges_x[0]), float(edges_x[-1])), (float(edges_y[0]), float(edges_y[-1])))
    for i in range(bx):
        for j in range(by):
            v = float(values[i][j])
            x, xr = ax.X(edges_x[i]), ax.X(edges_x[i + 1])
            yt, yb = ax.Y(edges_y[j + 1]), ax.Y(edges_y[j])
            fill = "#bbbbbb" if math.isnan(v) else uplift_color((v - lo) / (hi - lo) if hi > lo else 0.5)
            label = "n/a" if math.isnan(v) else f"{v:.4f}"
            c.rect(x, yt, xr - x, yb - yt, fill=fill, stroke="white", title=label)
            c.text((x + xr) / 2, (yt + yb) / 2 + 4, label, size=11, anchor="middle")
    ax.frame(xlabel, ylabel)
    return c.render()
