"""Tiny native SVG line-plot writer; no plotting dependency."""

from __future__ import annotations

import numpy as np

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def line_plot(path, series, title="", xlabel="", ylabel="", ylog=False):
    """Write a line plot; series is a list of (x, y, label) triples.

    With ylog=True the y data is log10-transformed (nonpositive points are
    dropped) and tick labels show powers of ten.
    """
    prepared = []
    for x, y, label in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if ylog:
            keep = y > 0
            x, y = x[keep], np.log10(y[keep])
        if x.size:
            prepared.append((x, y, label))
    if not prepared:
        raise ValueError("nothing to plot")

    x_lo = min(x.min() for x, _, _ in prepared)
    x_hi = max(x.max() for x, _, _ in prepared)
    y_lo = min(y.min() for _, y, _ in prepared)
    y_hi = max(y.max() for _, y, _ in prepared)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    def px(x):
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(y):
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>']
    if title:
        out.append(f'<text x="{_W/2:.1f}" y="24" text-anchor="middle" '
                   f'font-size="16" font-family="sans-serif">{title}</text>')

    for tx in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(tx):.2f}" y1="{py(y_lo):.2f}" '
                   f'x2="{px(tx):.2f}" y2="{py(y_hi):.2f}" '
                   f'stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{px(tx):.2f}" y="{_H - _MB + 18:.2f}" '
                   f'text-anchor="middle" font-size="12" '
                   f'font-family="sans-serif">{tx:.6g}</text>')
    for ty in _ticks(y_lo, y_hi):
        label = f"1e{ty:.0f}" if ylog and abs(ty - round(ty)) < 1e-9 else f"{ty:.6g}"
        out.append(f'<line x1="{px(x_lo):.2f}" y1="{py(ty):.2f}" '
                   f'x2="{px(x_hi):.2f}" y2="{py(ty):.2f}" '
                   f'stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{_ML - 8:.2f}" y="{py(ty) + 4:.2f}" '
                   f'text-anchor="end" font-size="12" '
                   f'font-family="sans-serif">{label}</text>')

    out.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
               f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>')
    if xlabel:
        out.append(f'<text x="{_W/2:.1f}" y="{_H - 12}" text-anchor="middle" '
                   f'font-size="13" font-family="sans-serif">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="18" y="{_H/2:.1f}" text-anchor="middle" '
                   f'font-size="13" font-family="sans-serif" '
                   f'transform="rotate(-90 18 {_H/2:.1f})">{ylabel}</text>')

    for i, (x, y, label) in enumerate(prepared):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        if label:
            yo = _MT + 18 + 16 * i
            out.append(f'<line x1="{_W - _MR - 150}" y1="{yo - 4}" '
                       f'x2="{_W - _MR - 125}" y2="{yo - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{_W - _MR - 118}" y="{yo}" font-size="12" '
                       f'font-family="sans-serif">{label}</text>')

    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
