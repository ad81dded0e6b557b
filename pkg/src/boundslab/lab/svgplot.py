"""Deterministic static SVG 1.1 line charts for aggregated traces.

Style (fixed, presentation-only): one solid polyline per series mean, one
dashed polyline at mean + one standard deviation, five axis ticks per axis,
and a legend on the right.  Identical inputs produce identical bytes; series
longer than MAX_POINTS are downsampled with a uniform stride (the final
point is always kept).
"""
from __future__ import annotations

import math

MAX_POINTS = 2000

WIDTH, HEIGHT = 840, 520
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 75, 200, 45, 55

PALETTE = (
    "#1b6ca8", "#c0392b", "#27ae60", "#8e44ad",
    "#d35400", "#16a085", "#7f8c8d", "#2c3e50",
)


def _downsample(xs, ys):
    n = len(xs)
    if n <= MAX_POINTS:
        return list(xs), list(ys)
    stride = math.ceil(n / MAX_POINTS)
    idx = list(range(0, n, stride))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return [xs[i] for i in idx], [ys[i] for i in idx]


def _ticks(low, high, count=5):
    if high <= low:
        high = low + 1.0
    return [low + (high - low) * i / (count - 1) for i in range(count)]


def _fmt(x):
    return f"{x:.2f}"


def render_plot(traces, path, *, title="", xlabel="t", ylabel="value") -> None:
    """Render the traces to a standalone SVG file."""
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace to plot")
    x_min = min(float(tr.t[0]) for tr in traces)
    x_max = max(float(tr.t[-1]) for tr in traces)
    y_values = []
    for tr in traces:
        y_values.extend(float(v) for v in tr.mean)
        y_values.extend(float(m) + float(s) for m, s in zip(tr.mean, tr.std))
    y_min, y_max = min(y_values), max(y_values)
    if y_max == y_min:
        y_min, y_max = y_min - 1.0, y_max + 1.0
    if x_max == x_min:
        x_max = x_min + 1.0

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x):
        return MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w

    def sy(y):
        return MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        # axes
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
        f'y2="{MARGIN_TOP + plot_h}" stroke="#000000" stroke-width="1"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP + plot_h}" '
        f'x2="{MARGIN_LEFT + plot_w}" y2="{MARGIN_TOP + plot_h}" '
        f'stroke="#000000" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH // 2}" y="25" text-anchor="middle" '
            f'font-family="monospace" font-size="16">{title}</text>')
    parts.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.1f}" y="{HEIGHT - 12}" '
        f'text-anchor="middle" font-family="monospace" font-size="13">{xlabel}</text>')
    parts.append(
        f'<text x="18" y="{MARGIN_TOP + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="monospace" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_TOP + plot_h / 2:.1f})">{ylabel}</text>')

    for x in _ticks(x_min, x_max):
        px = sx(x)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{MARGIN_TOP + plot_h}" x2="{_fmt(px)}" '
            f'y2="{MARGIN_TOP + plot_h + 5}" stroke="#000000" stroke-width="1"/>')
        parts.append(
            f'<text x="{_fmt(px)}" y="{MARGIN_TOP + plot_h + 20}" '
            f'text-anchor="middle" font-family="monospace" font-size="11">{x:.6g}</text>')
    for y in _ticks(y_min, y_max):
        py = sy(y)
        parts.append(
            f'<line x1="{MARGIN_LEFT - 5}" y1="{_fmt(py)}" x2="{MARGIN_LEFT}" '
            f'y2="{_fmt(py)}" stroke="#000000" stroke-width="1"/>')
        parts.append(
            f'<text x="{MARGIN_LEFT - 9}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{y:.6g}</text>')

    for i, tr in enumerate(traces):
        color = PALETTE[i % len(PALETTE)]
        xs, means = _downsample(tr.t, tr.mean)
        _, stds = _downsample(tr.t, tr.std)
        mean_pts = " ".join(f"{_fmt(sx(float(x)))},{_fmt(sy(float(y)))}"
                            for x, y in zip(xs, means))
        band_pts = " ".join(f"{_fmt(sx(float(x)))},{_fmt(sy(float(y) + float(s)))}"
                            for x, y, s in zip(xs, means, stds))
        parts.append(f'<polyline points="{mean_pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<polyline points="{band_pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1" stroke-dasharray="6,4"/>')
        ly = MARGIN_TOP + 14 + 18 * i
        lx = MARGIN_LEFT + plot_w + 18
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 26}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 32}" y="{ly + 4}" font-family="monospace" '
                     f'font-size="12">{tr.name}</text>')

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(parts) + "\n")
