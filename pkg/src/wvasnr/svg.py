"""Minimal static SVG line charts for sweep results (no plotting dependency)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

_W, _H = 640, 260
_MARGIN = dict(left=70, right=20, top=30, bottom=45)
_COLORS = {"analytic": "#1f5fbf", "mc": "#c0392b"}


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(t)
        t += step
    return ticks


def _panel(title, xs, series, y0, xlabel):
    ys = [y for _, pts, _ in series for y in pts if y is not None and math.isfinite(y)]
    ylo, yhi = min(ys + [0.0]), max(ys + [0.0])
    xt, yt = _ticks(min(xs), max(xs)), _ticks(ylo, yhi)
    xlo, xhi = min(xt[0], min(xs)), max(xt[-1], max(xs))
    ylo, yhi = yt[0], yt[-1]
    pw = _W - _MARGIN["left"] - _MARGIN["right"]
    ph = _H - _MARGIN["top"] - _MARGIN["bottom"]

    def sx(x):
        return _MARGIN["left"] + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return y0 + _MARGIN["top"] + (1.0 - (y - ylo) / ((yhi - ylo) or 1.0)) * ph

    out = [
        f'<text x="{_W / 2:.1f}" y="{y0 + 18:.1f}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{_MARGIN["left"]}" y="{y0 + _MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#444"/>',
    ]
    for t in xt:
        out.append(
            f'<text x="{sx(t):.1f}" y="{y0 + _H - 28:.1f}" text-anchor="middle" font-size="10">{t:.3g}</text>'
        )
    for t in yt:
        out.append(
            f'<text x="{_MARGIN["left"] - 6}" y="{sy(t) + 3:.1f}" text-anchor="end" font-size="10">{t:.3g}</text>'
        )
    out.append(
        f'<text x="{_W / 2:.1f}" y="{y0 + _H - 10:.1f}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>'
    )
    for i, (label, pts, kind) in enumerate(series):
        color = _COLORS[kind]
        coords = [(sx(x), sy(y)) for x, y in zip(xs, pts) if y is not None and math.isfinite(y)]
        if not coords:
            continue
        if kind == "analytic":
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            out.extend(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>' for x, y in coords)
        ly = y0 + _MARGIN["top"] + 14 + 14 * i
        out.append(
            f'<text x="{_MARGIN["left"] + 8}" y="{ly:.1f}" font-size="10" fill="{color}">{escape(label)}</text>'
        )
    return out


def sweep_svg(result):
    """Two stacked panels (weak-value on top, standard detection below)."""
    xs = [r.value for r in result.rows]
    name = result.spec.parameter
    body = []
    for i, (branch, title) in enumerate((("wva", "weak-value setup"), ("sd", "standard detection"))):
        series = [
            ("analytic", [getattr(r, f"snr_{branch}_analytic") for r in result.rows], "analytic"),
        ]
        mc = [getattr(r, f"{branch}_mc") for r in result.rows]
        if all(e is not None for e in mc):
            series.append(("Monte Carlo", [e.snr for e in mc], "mc"))
        body.extend(_panel(f"SNR, {title}", xs, series, i * _H, f"{name} (SI)"))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{2 * _H}" '
        f'viewBox="0 0 {_W} {2 * _H}" font-family="sans-serif">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )
