"""Tiny hand-rolled SVG figures (scatter, line, annotations).

Figures are for humans; every figure a caller emits gets a CSV sidecar
with exactly the plotted values, and tests bind to the CSV.  Output is
deterministic: same inputs, same bytes, except for an optional timestamp
comment that callers can suppress.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

WIDTH, HEIGHT = 640, 440
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 24, 48, 56


@dataclass
class Series:
    xs: list[float]
    ys: list[float]
    kind: str = "points"  # "points" | "line"
    label: str = ""
    color: str = ""


@dataclass
class Figure:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    annotations: list[str] = field(default_factory=list)

    def add_points(self, xs, ys, label=""):
        self.series.append(Series(list(xs), list(ys), "points", label))

    def add_line(self, xs, ys, label=""):
        self.series.append(Series(list(xs), list(ys), "line", label))


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / target
    magnitude = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * magnitude
        if span / step <= target:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(value) < step * 1e-9 else value)
        value += step
    return ticks


def _fmt(value: float) -> str:
    return f"{value:g}"


def render_figure(fig: Figure, timestamp: bool = True) -> str:
    xs = [x for s in fig.series for x in s.xs]
    ys = [y for s in fig.series for y in s.ys]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    x_pad = 0.06 * (x_hi - x_lo)
    y_pad = 0.08 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x):
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
    ]
    if timestamp:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        parts.append(f"<!-- generated {stamp} -->")
    parts.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    parts.append(
        f'<text x="{WIDTH / 2:.1f}" y="26" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{_escape(fig.title)}</text>'
    )

    # frame
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    x1, y1 = MARGIN_LEFT + plot_w, MARGIN_TOP
    parts.append(
        f'<rect x="{x0}" y="{y1}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#444" stroke-width="1"/>'
    )
    for tick in _nice_ticks(x_lo, x_hi):
        tx = px(tick)
        parts.append(
            f'<line x1="{tx:.2f}" y1="{y0}" x2="{tx:.2f}" y2="{y0 + 5}" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{tx:.2f}" y="{y0 + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(tick)}</text>'
        )
    for tick in _nice_ticks(y_lo, y_hi):
        ty = py(tick)
        parts.append(
            f'<line x1="{x0 - 5}" y1="{ty:.2f}" x2="{x0}" y2="{ty:.2f}" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{x0 - 9}" y="{ty + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(tick)}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_escape(fig.xlabel)}</text>'
    )
    parts.append(
        f'<text x="18" y="{MARGIN_TOP + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_TOP + plot_h / 2:.1f})">{_escape(fig.ylabel)}</text>'
    )

    for i, series in enumerate(fig.series):
        color = series.color or PALETTE[i % len(PALETTE)]
        if series.kind == "line":
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(series.xs, series.ys))
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.8"/>'
            )
        else:
            for x, y in zip(series.xs, series.ys):
                parts.append(
                    f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="{color}" '
                    'fill-opacity="0.75"/>'
                )
        if series.label:
            ly = MARGIN_TOP + 16 + 16 * i
            parts.append(
                f'<circle cx="{x1 - 150}" cy="{ly - 4}" r="4" fill="{color}"/>'
                if series.kind == "points"
                else f'<line x1="{x1 - 156}" y1="{ly - 4}" x2="{x1 - 144}" y2="{ly - 4}" '
                f'stroke="{color}" stroke-width="1.8"/>'
            )
            parts.append(
                f'<text x="{x1 - 136}" y="{ly}" font-family="sans-serif" '
                f'font-size="11">{_escape(series.label)}</text>'
            )

    for i, note in enumerate(fig.annotations):
        parts.append(
            f'<text x="{x0 + 10}" y="{MARGIN_TOP + 18 + 15 * i}" '
            f'font-family="sans-serif" font-size="12" fill="#333">{_escape(note)}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def write_figure(path, fig: Figure, timestamp: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_figure(fig, timestamp=timestamp))
