"""Fit figures.

`render_svg` writes a small self-contained SVG with one ``<polyline>``
per curve, byte-identical for identical inputs. `save_figure` draws the
same views with matplotlib for raster / PDF output.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .core import TWO_PI
from .fit import FitResult

# qualitative palette for component curves
PALETTE = ("#4daf4a", "#984ea3", "#ff7f00", "#e41a1c", "#377eb8",
           "#a65628", "#f781bf", "#999999")

WIDTH, HEIGHT = 640, 400
MARGIN = 50


def _dense_grid(t, n_periods=1, n=400):
    lo, hi = float(np.min(t)), float(np.max(t)) + TWO_PI * (n_periods - 1)
    return np.linspace(lo, hi, n * n_periods)


def along_periods(result: FitResult, raw) -> tuple[np.ndarray, np.ndarray]:
    """Time axis and raw values laid out over all observed periods."""
    raw = np.asarray(raw, float)
    p = raw.size // result.time_points.size
    t = (result.time_points[None, :] + TWO_PI * np.arange(p)[:, None]).ravel()
    return t, raw


def _scaler(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (np.asarray(v) - lo) * (b - a) / span


def _points(xs, ys, sx, sy) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(sx(xs), sy(ys)))


def render_svg(result: FitResult, t=None, y=None, components: bool = False,
               title: str = "", n_periods: int = 1) -> str:
    """SVG of data and fitted curve, or of the centered components.

    `t`, `y` default to the fitted data; pass the original series to draw
    raw points instead. With `n_periods > 1` the fit is repeated over that
    many periods (ignored for the component view).
    """
    t = result.time_points if t is None else np.asarray(t, float)
    y = result.data if y is None else np.asarray(y, float)
    grid = _dense_grid(result.time_points, 1 if components else n_periods)
    if components:
        curves = result.model.components(grid)
        ys = [curves.ravel()]
    else:
        curves = result.model(grid)[None, :]
        ys = [curves.ravel(), y]
    lo = min(float(np.min(v)) for v in ys)
    hi = max(float(np.max(v)) for v in ys)
    pad = 0.05 * (hi - lo if hi > lo else 1.0)
    sx = _scaler(float(grid[0]), float(grid[-1]), MARGIN, WIDTH - MARGIN)
    sy = _scaler(lo - pad, hi + pad, HEIGHT - MARGIN, MARGIN)

    heading = "FMM components" if components else "FMM fit"
    if title:
        heading = f"{heading}: {title}"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="25" text-anchor="middle" font-size="16">'
        f'{escape(heading)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">'
        f'time (radians)</text>',
    ]
    if components:
        for j, c in enumerate(curves):
            color = PALETTE[j % len(PALETTE)]
            out.append(f'<polyline class="component" fill="none" stroke="{color}" '
                       f'stroke-width="2" points="{_points(grid, c, sx, sy)}"/>')
            ly = MARGIN + 16 * j
            out.append(f'<text class="legend" x="{WIDTH - MARGIN - 60}" y="{ly}" '
                       f'font-size="12" fill="{color}">Wave {j + 1}</text>')
    else:
        for xi, yi in zip(sx(t), sy(y)):
            out.append(f'<circle class="data" cx="{xi:.2f}" cy="{yi:.2f}" r="2.5" fill="#555555"/>')
        out.append(f'<polyline class="fit" fill="none" stroke="#377eb8" stroke-width="2" '
                   f'points="{_points(grid, curves[0], sx, sy)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_fit(result: FitResult, ax=None, t=None, y=None, title: str = "",
             n_periods: int = 1):
    """Data as points and the fitted model as a line."""
    import matplotlib.pyplot as plt

    if ax is None:
        _, ax = plt.subplots(figsize=(6, 4))
    t = result.time_points if t is None else t
    y = result.data if y is None else y
    grid = _dense_grid(result.time_points, n_periods)
    ax.plot(t, y, "o", ms=3, color="0.4", label="data")
    ax.plot(grid, result.model(grid), lw=2, color=PALETTE[4], label="FMM fit")
    ax.set_xlabel("time (radians)")
    ax.set_title("FMM fit" + (f": {title}" if title else ""))
    return ax


def plot_components(result: FitResult, ax=None, legend: bool = True, title: str = ""):
    import matplotlib.pyplot as plt

    if ax is None:
        _, ax = plt.subplots(figsize=(6, 4))
    grid = _dense_grid(result.time_points)
    for j, c in enumerate(result.model.components(grid)):
        ax.plot(grid, c, lw=2, color=PALETTE[j % len(PALETTE)], label=f"Wave {j + 1}")
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel("time (radians)")
    ax.set_title("FMM components" + (f": {title}" if title else ""))
    if legend:
        ax.legend(loc="lower center", ncol=min(result.model.m, 4), frameon=False)
    return ax


def save_figure(result: FitResult, path, t=None, y=None, components: bool | None = None,
                title: str = "", n_periods: int = 1):
    """Write a matplotlib figure; both panels side by side unless
    `components` picks one."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if components is None:
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(11, 4))
        plot_fit(result, a1, t, y, title, n_periods)
        plot_components(result, a2, title=title)
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        if components:
            plot_components(result, ax, title=title)
        else:
            plot_fit(result, ax, t, y, title, n_periods)
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)
