"""Minimal deterministic SVG 1.1 line charts.

No plotting dependency: artifact files must be bit-identical across runs,
so everything here is a pure function of the data with fixed float
formatting and no timestamps or generated ids.
"""
from __future__ import annotations

import math

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 72, 24, 40, 56
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, count: int = 5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / count))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= count:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(t)
        t += step
    return out or [lo]


def line_chart(path, series, title: str, xlabel: str, ylabel: str,
               logx: bool = False, logy: bool = False) -> None:
    """Write a one-panel chart.  series: list of (label, xs, ys[, dashed])."""
    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    pts = []
    for s in series:
        xs, ys = s[1], s[2]
        for x, y in zip(xs, ys):
            if logx and x <= 0 or logy and y <= 0:
                continue
            pts.append((tx(x), ty(y)))
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xlo = min(p[0] for p in pts)
    xhi = max(p[0] for p in pts)
    ylo = min(p[1] for p in pts)
    yhi = max(p[1] for p in pts)
    if xhi - xlo < 1e-12:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi - ylo < 1e-12:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    padx = 0.03 * (xhi - xlo)
    pady = 0.05 * (yhi - ylo)
    xlo, xhi, ylo, yhi = xlo - padx, xhi + padx, ylo - pady, yhi + pady

    def px(v):
        return _ML + (v - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - (v - ylo) / (yhi - ylo) * (_H - _MT - _MB)

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">'
    )
    out.append(f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>')
    out.append(
        f'<text x="{_W // 2}" y="24" text-anchor="middle" '
        f'font-family="monospace" font-size="15">{title}</text>'
    )
    ax = f'stroke="#333" stroke-width="1"'
    out.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" {ax}/>')
    out.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" {ax}/>')

    for t in _ticks(xlo, xhi):
        X = px(t)
        lab = f"{10 ** t:.3g}" if logx else f"{t:.4g}"
        out.append(f'<line x1="{_fmt(X)}" y1="{_H - _MB}" x2="{_fmt(X)}" y2="{_H - _MB + 5}" {ax}/>')
        out.append(
            f'<text x="{_fmt(X)}" y="{_H - _MB + 20}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{lab}</text>'
        )
    for t in _ticks(ylo, yhi):
        Y = py(t)
        lab = f"{10 ** t:.3g}" if logy else f"{t:.4g}"
        out.append(f'<line x1="{_ML - 5}" y1="{_fmt(Y)}" x2="{_ML}" y2="{_fmt(Y)}" {ax}/>')
        out.append(
            f'<text x="{_ML - 8}" y="{_fmt(Y + 4)}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{lab}</text>'
        )
    out.append(
        f'<text x="{(_ML + _W - _MR) // 2}" y="{_H - 12}" text-anchor="middle" '
        f'font-family="monospace" font-size="12">{xlabel}</text>'
    )
    out.append(
        f'<text x="16" y="{(_MT + _H - _MB) // 2}" text-anchor="middle" '
        f'font-family="monospace" font-size="12" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) // 2})">{ylabel}</text>'
    )

    for i, s in enumerate(series):
        label, xs, ys = s[0], s[1], s[2]
        dashed = len(s) > 3 and s[3]
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        color = _COLORS[i % len(_COLORS)]
        coords = []
        for x, y in zip(xs, ys):
            if logx and x <= 0 or logy and y <= 0:
                continue
            coords.append(f"{_fmt(px(tx(x)))},{_fmt(py(ty(y)))}")
        if coords:
            joined = " ".join(coords)
            out.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                f'points="{joined}"/>'
            )
        ly = _MT + 16 + 16 * i
        out.append(
            f'<line x1="{_W - _MR - 150}" y1="{ly - 4}" x2="{_W - _MR - 120}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"{dash}/>'
        )
        out.append(
            f'<text x="{_W - _MR - 114}" y="{ly}" font-family="monospace" '
            f'font-size="11">{label}</text>'
        )
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
