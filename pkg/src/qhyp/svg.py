"""Minimal SVG line plots (no plotting dependencies)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
COLORS = ("#1f77b4", "#2ca02c", "#555555", "#d62728", "#ff7f0e", "#9467bd")
DASHES = {"bound": "2,3", "unmonitored": "6,4"}


@dataclass
class Panel:
    ylabel: str
    series: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    ylim: tuple[float, float] | None = None
    steps: bool = False


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _polyline(x, y, sx, sy, steps: bool) -> str:
    pts: list[tuple[str, str]] = []
    for i, (a, b) in enumerate(zip(x, y)):
        if not np.isfinite(b):
            continue
        if steps and pts:
            pts.append((f"{sx(a):.2f}", f"{sy(y[i - 1]):.2f}"))
        pts.append((f"{sx(a):.2f}", f"{sy(b):.2f}"))
    # drop duplicates and the interior of horizontal runs at pixel resolution
    kept: list[tuple[str, str]] = []
    for p in pts:
        if kept and p == kept[-1]:
            continue
        if len(kept) >= 2 and kept[-1][1] == p[1] == kept[-2][1]:
            kept[-1] = p
            continue
        kept.append(p)
    return " ".join(f"{a},{b}" for a, b in kept)


def render(panels: list[Panel], xlabel: str, title: str = "") -> str:
    left, right, top, bottom = 70, 150, 30, 45
    gap = 20
    n = len(panels)
    ph = (HEIGHT - top - bottom - gap * (n - 1)) / n
    pw = WIDTH - left - right
    xs = [s[0] for p in panels for s in p.series.values() if len(s[0])]
    xmin = float(min(np.min(x) for x in xs)) if xs else 0.0
    xmax = float(max(np.max(x) for x in xs)) if xs else 1.0
    if xmax <= xmin:
        xmax = xmin + 1.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="18" text-anchor="middle">{escape(title)}</text>')

    def sx(v):
        return left + (v - xmin) / (xmax - xmin) * pw

    for k, p in enumerate(panels):
        y0 = top + k * (ph + gap)
        ys = [s[1][np.isfinite(s[1])] for s in p.series.values()]
        ys = [y for y in ys if len(y)]
        if p.ylim is not None:
            ymin, ymax = p.ylim
        elif ys:
            ymin = float(min(np.min(y) for y in ys))
            ymax = float(max(np.max(y) for y in ys))
        else:
            ymin, ymax = 0.0, 1.0
        if ymax <= ymin:
            ymin, ymax = ymin - 0.5, ymax + 0.5

        def sy(v, y0=y0, ymin=ymin, ymax=ymax):
            return y0 + ph - (v - ymin) / (ymax - ymin) * ph

        out.append(f'<rect x="{left}" y="{y0:.2f}" width="{pw}" height="{ph:.2f}" fill="none" stroke="black"/>')
        for t in _ticks(ymin, ymax):
            out.append(f'<text x="{left - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.3g}</text>')
        out.append(
            f'<text x="16" y="{y0 + ph / 2:.2f}" transform="rotate(-90 16 {y0 + ph / 2:.2f})" '
            f'text-anchor="middle">{escape(p.ylabel)}</text>'
        )
        for i, (label, (x, y)) in enumerate(p.series.items()):
            color = COLORS[i % len(COLORS)]
            dash = DASHES.get(label)
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} '
                f'points="{_polyline(np.asarray(x), np.asarray(y), sx, sy, p.steps)}"/>'
            )
            ly = y0 + 15 + 16 * i
            out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{color}"{extra}/>')
            out.append(f'<text x="{left + pw + 35}" y="{ly}">{escape(label)}</text>')
    ybase = HEIGHT - bottom
    for t in _ticks(xmin, xmax, 6):
        out.append(f'<text x="{sx(t):.2f}" y="{ybase + 16}" text-anchor="middle">{t:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, panels: list[Panel], xlabel: str, title: str = "") -> Path:
    path = Path(path)
    path.write_text(render(panels, xlabel, title))
    return path
