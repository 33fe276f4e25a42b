"""Minimal self-contained SVG line/scatter rendering.

Plots are a convenience output of the CLI; the CSV files are the contract.
Rendering is deterministic: identical data produce identical bytes.
"""

from __future__ import annotations

import numpy as np

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 64, 16, 28, 44
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = np.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + step * 1e-9:
        out.append(0.0 if abs(v) < step * 1e-9 else float(v))
        v += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_plot(path, series, title: str = "", xlabel: str = "", ylabel: str = "",
              scatter: bool = False) -> None:
    """Write an SVG plot of ``series`` = [(xs, ys, label), ...]."""
    xs_all = np.concatenate([np.asarray(s[0], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[1], float) for s in series])
    x0, x1 = float(np.min(xs_all)), float(np.max(xs_all))
    y0, y1 = float(np.min(ys_all)), float(np.max(ys_all))
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(x):
        return _ML + (x - x0) / (x1 - x0) * pw

    def py(y):
        return _MT + (y1 - y) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" '
        'stroke="black" stroke-width="1"/>',
    ]
    for tx in _ticks(x0, x1):
        X = px(tx)
        parts.append(f'<line x1="{X:.1f}" y1="{_MT + ph}" x2="{X:.1f}" '
                     f'y2="{_MT + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{X:.1f}" y="{_MT + ph + 16}" font-size="11" '
                     f'text-anchor="middle">{_fmt(tx)}</text>')
    for ty in _ticks(y0, y1):
        Y = py(ty)
        parts.append(f'<line x1="{_ML - 4}" y1="{Y:.1f}" x2="{_ML}" '
                     f'y2="{Y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 7}" y="{Y + 3.5:.1f}" font-size="11" '
                     f'text-anchor="end">{_fmt(ty)}</text>')
    if title:
        parts.append(f'<text x="{_W / 2}" y="18" font-size="13" '
                     f'text-anchor="middle">{title}</text>')
    if xlabel:
        parts.append(f'<text x="{_ML + pw / 2}" y="{_H - 10}" font-size="12" '
                     f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="14" y="{_MT + ph / 2}" font-size="12" '
                     f'text-anchor="middle" transform="rotate(-90 14 {_MT + ph / 2})">'
                     f'{ylabel}</text>')

    for i, (sx, sy, label) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        sx = np.asarray(sx, float)
        sy = np.asarray(sy, float)
        if scatter:
            for x, y in zip(sx, sy):
                parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.2" '
                             f'fill="{color}"/>')
        else:
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         'stroke-width="1.3"/>')
        if label:
            ly = _MT + 14 + 14 * i
            parts.append(f'<line x1="{_ML + pw - 110}" y1="{ly - 4}" '
                         f'x2="{_ML + pw - 90}" y2="{ly - 4}" stroke="{color}" '
                         'stroke-width="2"/>')
            parts.append(f'<text x="{_ML + pw - 84}" y="{ly}" font-size="11">'
                         f'{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
