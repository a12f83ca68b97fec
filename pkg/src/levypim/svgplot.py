"""Minimal self-contained SVG line plots (no plotting dependency).

Deliberately small: polyline series, axes with ticks, a legend and an
optional fitted-line annotation are all the figures here need.  Numbers are
formatted deterministically so output files are diffable in tests.
"""

from __future__ import annotations

import numpy as np

from .errors import LevyPimError, ParameterError

_W, _H = 760, 520
_ML, _MR, _MT, _MB = 70, 20, 36, 54
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(x: float) -> str:
    return np.format_float_positional(float(x), precision=6, trim="-")


def _ticks(lo: float, hi: float, n: int = 6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for m in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= m * mag:
            step = m * mag
            break
    start = np.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


class SvgCanvas:
    def __init__(self, title, xlabel, ylabel):
        self.parts = []
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel

    def _x(self, v):
        return _ML + (v - self.x0) / (self.x1 - self.x0) * (_W - _ML - _MR)

    def _y(self, v):
        return _H - _MB - (v - self.y0) / (self.y1 - self.y0) * (_H - _MT - _MB)

    def set_range(self, xs, ys):
        x0, x1 = float(np.min(xs)), float(np.max(xs))
        y0, y1 = float(np.min(ys)), float(np.max(ys))
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        padx = 0.03 * (x1 - x0)
        pady = 0.06 * (y1 - y0)
        self.x0, self.x1 = x0 - padx, x1 + padx
        self.y0, self.y1 = y0 - pady, y1 + pady

    def axes(self):
        p = self.parts
        p.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
                 f'height="{_H - _MT - _MB}" fill="none" stroke="#444"/>')
        for t in _ticks(self.x0, self.x1):
            x = self._x(t)
            p.append(f'<line x1="{x:.2f}" y1="{_H - _MB}" x2="{x:.2f}" '
                     f'y2="{_H - _MB + 5}" stroke="#444"/>')
            p.append(f'<text x="{x:.2f}" y="{_H - _MB + 18}" font-size="11" '
                     f'text-anchor="middle">{_fmt(t)}</text>')
        for t in _ticks(self.y0, self.y1):
            y = self._y(t)
            p.append(f'<line x1="{_ML - 5}" y1="{y:.2f}" x2="{_ML}" '
                     f'y2="{y:.2f}" stroke="#444"/>')
            p.append(f'<text x="{_ML - 8}" y="{y + 4:.2f}" font-size="11" '
                     f'text-anchor="end">{_fmt(t)}</text>')
        p.append(f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 14}" font-size="13" '
                 f'text-anchor="middle">{self.xlabel}</text>')
        p.append(f'<text x="16" y="{(_MT + _H - _MB) / 2}" font-size="13" '
                 f'text-anchor="middle" transform="rotate(-90 16 '
                 f'{(_MT + _H - _MB) / 2})">{self.ylabel}</text>')
        p.append(f'<text x="{(_ML + _W - _MR) / 2}" y="22" font-size="14" '
                 f'text-anchor="middle">{self.title}</text>')

    def polyline(self, xs, ys, color, width=1.3, dash=None):
        pts = " ".join(f"{self._x(x):.2f},{self._y(y):.2f}" for x, y in zip(xs, ys))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline points="{pts}" fill="none" '
                          f'stroke="{color}" stroke-width="{width}"{d}/>')

    def markers(self, xs, ys, color):
        for x, y in zip(xs, ys):
            self.parts.append(f'<circle cx="{self._x(x):.2f}" cy="{self._y(y):.2f}" '
                              f'r="3" fill="{color}"/>')

    def legend(self, entries):
        y = _MT + 14
        for name, color in entries:
            self.parts.append(f'<line x1="{_W - _MR - 150}" y1="{y}" '
                              f'x2="{_W - _MR - 120}" y2="{y}" stroke="{color}" '
                              f'stroke-width="2"/>')
            self.parts.append(f'<text x="{_W - _MR - 114}" y="{y + 4}" '
                              f'font-size="12">{name}</text>')
            y += 18

    def note(self, text):
        self.parts.append(f'<text x="{_ML + 10}" y="{_MT + 16}" font-size="12" '
                          f'fill="#333">{text}</text>')

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
                f'height="{_H}" viewBox="0 0 {_W} {_H}">\n'
                f'<rect width="{_W}" height="{_H}" fill="white"/>\n'
                f"{body}\n</svg>\n")


def emit_svg_plot(series, destination, title="", xlabel="t", ylabel="x",
                  note=None, fit_line=None):
    """Render named series [(name, xs, ys), ...] as a standalone SVG.

    ``fit_line=(xs, ys, label)`` draws a dashed reference line (used for the
    fitted convergence slope).  An empty series set is rejected before any
    file is touched.
    """
    series = list(series)
    if not series or any(len(xs) == 0 for _, xs, _ in series):
        raise ParameterError("refusing to plot an empty series set")
    all_x = np.concatenate([np.asarray(xs, dtype=float) for _, xs, _ in series])
    all_y = np.concatenate([np.asarray(ys, dtype=float) for _, ys, _ in series])
    if fit_line is not None:
        all_x = np.concatenate([all_x, np.asarray(fit_line[0], dtype=float)])
        all_y = np.concatenate([all_y, np.asarray(fit_line[1], dtype=float)])
    if not (np.all(np.isfinite(all_x)) and np.all(np.isfinite(all_y))):
        raise ParameterError("series contain non-finite values")

    canvas = SvgCanvas(title, xlabel, ylabel)
    canvas.set_range(all_x, all_y)
    canvas.axes()
    legend = []
    for i, (name, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        canvas.polyline(xs, ys, color)
        if len(xs) <= 24:
            canvas.markers(xs, ys, color)
        legend.append((name, color))
    if fit_line is not None:
        xs, ys, label = fit_line
        canvas.polyline(xs, ys, "#000000", width=1.2, dash="6,4")
        legend.append((label, "#000000"))
    canvas.legend(legend)
    if note:
        canvas.note(note)
    try:
        with open(destination, "w") as f:
            f.write(canvas.render())
    except OSError as exc:
        raise LevyPimError(f"cannot write SVG {destination}: {exc}") from exc
