"""Self-contained SVG emission: one mean line per series with a shaded
band of +/- one standard error of the mean.

The writer is deliberately hand-rolled: every byte of the output is a
deterministic function of the input records, which the end-to-end
determinism contract requires.
"""

from __future__ import annotations

import math

from .errors import ConfigError

WIDTH, HEIGHT = 640.0, 440.0
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64.0, 24.0, 28.0, 46.0

PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#e377c2",
]


def mean_sem(values):
    """Two-pass sample mean and standard error of the mean."""
    n = len(values)
    if n == 0:
        raise ValueError("empty sample")
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _fmt(x):
    return f"{x:.2f}"


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _axis_label(v):
    return f"{v:.6g}"


def render_series_svg(series, x_label, y_label, title=""):
    """Render [(label, [(x, mean, sem), ...]), ...] to an SVG string."""
    if not series:
        raise ConfigError("nothing to plot")
    xs = [p[0] for _, pts in series for p in pts]
    los = [p[1] - p[2] for _, pts in series for p in pts]
    his = [p[1] + p[2] for _, pts in series for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(los + [0.0]), max(his)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_hi += pad

    x_span = WIDTH - MARGIN_L - MARGIN_R
    y_span = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * x_span

    def py(y):
        return HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * y_span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0f}" '
        f'height="{HEIGHT:.0f}" viewBox="0 0 {WIDTH:.0f} {HEIGHT:.0f}">',
        f'<rect width="{WIDTH:.0f}" height="{HEIGHT:.0f}" fill="white"/>',
    ]
    # axes and ticks
    ax = (
        f'<line x1="{_fmt(MARGIN_L)}" y1="{_fmt(HEIGHT - MARGIN_B)}" '
        f'x2="{_fmt(WIDTH - MARGIN_R)}" y2="{_fmt(HEIGHT - MARGIN_B)}" '
        'stroke="black" stroke-width="1"/>'
        f'<line x1="{_fmt(MARGIN_L)}" y1="{_fmt(MARGIN_T)}" '
        f'x2="{_fmt(MARGIN_L)}" y2="{_fmt(HEIGHT - MARGIN_B)}" '
        'stroke="black" stroke-width="1"/>'
    )
    out.append(ax)
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        out.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(HEIGHT - MARGIN_B)}" '
            f'x2="{_fmt(x)}" y2="{_fmt(HEIGHT - MARGIN_B + 4)}" stroke="black"/>'
            f'<text x="{_fmt(x)}" y="{_fmt(HEIGHT - MARGIN_B + 17)}" '
            f'font-size="11" text-anchor="middle">{_axis_label(t)}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        out.append(
            f'<line x1="{_fmt(MARGIN_L - 4)}" y1="{_fmt(y)}" '
            f'x2="{_fmt(MARGIN_L)}" y2="{_fmt(y)}" stroke="black"/>'
            f'<text x="{_fmt(MARGIN_L - 7)}" y="{_fmt(y + 4)}" '
            f'font-size="11" text-anchor="end">{_axis_label(t)}</text>'
        )
    out.append(
        f'<text x="{_fmt(MARGIN_L + x_span / 2)}" y="{_fmt(HEIGHT - 8)}" '
        f'font-size="13" text-anchor="middle">{x_label}</text>'
    )
    out.append(
        f'<text x="14" y="{_fmt(MARGIN_T + y_span / 2)}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 14 '
        f'{_fmt(MARGIN_T + y_span / 2)})">{y_label}</text>'
    )
    if title:
        out.append(
            f'<text x="{_fmt(WIDTH / 2)}" y="18" font-size="14" '
            f'text-anchor="middle">{title}</text>'
        )

    for idx, (label, pts) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = sorted(pts)
        band = [(x, m, s) for x, m, s in pts if s > 0.0]
        if len(pts) > 1 and band:
            upper = [
                f"{_fmt(px(x))},{_fmt(py(m + s))}" for x, m, s in pts
            ]
            lower = [
                f"{_fmt(px(x))},{_fmt(py(m - s))}" for x, m, s in reversed(pts)
            ]
            out.append(
                f'<polygon points="{" ".join(upper + lower)}" fill="{color}" '
                'fill-opacity="0.18" stroke="none"/>'
            )
        if len(pts) > 1:
            line = " ".join(f"{_fmt(px(x))},{_fmt(py(m))}" for x, m, _ in pts)
            out.append(
                f'<polyline points="{line}" fill="none" stroke="{color}" '
                'stroke-width="1.8"/>'
            )
        for x, m, _ in pts:
            out.append(
                f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(m))}" r="3" '
                f'fill="{color}"/>'
            )
        ly = MARGIN_T + 14 + 16 * idx
        lx = WIDTH - MARGIN_R - 130
        out.append(
            f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4)}" x2="{_fmt(lx + 22)}" '
            f'y2="{_fmt(ly - 4)}" stroke="{color}" stroke-width="2"/>'
            f'<text x="{_fmt(lx + 27)}" y="{_fmt(ly)}" font-size="12">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
