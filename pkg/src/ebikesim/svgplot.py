"""Minimal static SVG line plots for run reports. No plotting dependency;
the figures are plain polylines with axes and a legend."""

from __future__ import annotations

import math

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 860, 300
_ML, _MR, _MT, _MB = 64, 16, 28, 40


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * abs(hi):
        ticks.append(round(t, 12))
        t += step
    return ticks


def line_plot_svg(path, title: str, series, x_label: str, y_label: str) -> None:
    """series: iterable of (label, xs, ys); NaN samples break the polyline."""
    xs_all = [x for _, xs, ys in series for x, y in zip(xs, ys) if not math.isnan(y)]
    ys_all = [y for _, xs, ys in series for y in ys if not math.isnan(y)]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return _ML + (x - x_lo) / (x_hi - x_lo or 1.0) * (_W - _ML - _MR)

    def py(y):
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="16" text-anchor="middle" font-size="13">{title}</text>',
    ]
    for tx in _ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{px(tx):.1f}" y1="{_H - _MB}" x2="{px(tx):.1f}" y2="{_MT}" '
            f'stroke="#eeeeee"/>'
            f'<text x="{px(tx):.1f}" y="{_H - _MB + 14}" text-anchor="middle">{tx:g}</text>'
        )
    for ty in _ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{_ML}" y1="{py(ty):.1f}" x2="{_W - _MR}" y2="{py(ty):.1f}" '
            f'stroke="#eeeeee"/>'
            f'<text x="{_ML - 6}" y="{py(ty) + 4:.1f}" text-anchor="end">{ty:g}</text>'
        )
    parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        f'fill="none" stroke="#444444"/>'
    )
    parts.append(
        f'<text x="{_W / 2:.0f}" y="{_H - 8}" text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="14" y="{_H / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {_H / 2:.0f})">{y_label}</text>'
    )
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        points: list[str] = []
        chunks = []
        for x, y in zip(xs, ys):
            if math.isnan(y):
                if points:
                    chunks.append(points)
                points = []
            else:
                points.append(f"{px(x):.1f},{py(y):.1f}")
        if points:
            chunks.append(points)
        for chunk in chunks:
            parts.append(
                f'<polyline points="{" ".join(chunk)}" fill="none" stroke="{color}" '
                f'stroke-width="1.3"/>'
            )
        parts.append(
            f'<text x="{_W - _MR - 8}" y="{_MT + 14 + 14 * i}" text-anchor="end" '
            f'fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
