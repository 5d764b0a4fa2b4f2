"""Standalone SVG line plots and heatmaps.

Output is plain text with fixed number formatting, so the same data always
gives the same bytes.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#000000", "#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str
    dashed: bool = False
    markers: bool = False


def _f(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5):
    return np.linspace(lo, hi, n)


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


class _Frame:
    def __init__(self, xlim, ylim, width=WIDTH, height=HEIGHT):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.w, self.h = width, height
        self.pw = width - MARGIN["left"] - MARGIN["right"]
        self.ph = height - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + (1 - (np.asarray(y) - self.y0) / (self.y1 - self.y0)) * self.ph

    def axes(self, title, xlabel, ylabel, ytick_fmt=_tick_label):
        L, T = MARGIN["left"], MARGIN["top"]
        out = [
            f'<rect x="{L}" y="{T}" width="{self.pw}" height="{self.ph}" fill="none" stroke="#444"/>',
            f'<text x="{self.w / 2:.0f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<text x="{L + self.pw / 2:.0f}" y="{self.h - 12}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
            f'<text x="16" y="{T + self.ph / 2:.0f}" text-anchor="middle" font-size="13" '
            f'transform="rotate(-90 16 {T + self.ph / 2:.0f})">{escape(ylabel)}</text>',
        ]
        for v in _ticks(self.x0, self.x1):
            x = self.px(v)
            out.append(f'<line x1="{_f(x)}" y1="{T + self.ph}" x2="{_f(x)}" y2="{T + self.ph + 5}" stroke="#444"/>')
            out.append(
                f'<text x="{_f(x)}" y="{T + self.ph + 19}" text-anchor="middle" font-size="11">{_tick_label(v)}</text>'
            )
        for v in _ticks(self.y0, self.y1):
            y = self.py(v)
            out.append(f'<line x1="{L - 5}" y1="{_f(y)}" x2="{L}" y2="{_f(y)}" stroke="#444"/>')
            out.append(
                f'<text x="{L - 8}" y="{_f(y + 4)}" text-anchor="end" font-size="11">{ytick_fmt(v)}</text>'
            )
        return out


def _document(width, height, body):
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def line_plot(
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logy: bool = False,
    ylim: Optional[Sequence[float]] = None,
) -> str:
    """Several curves on shared axes with a legend on the right."""
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(s.x, float) for s in series])
    ys = np.concatenate([np.asarray(s.y, float) for s in series])
    if logy:
        if np.any(ys[np.isfinite(ys)] <= 0):
            raise ValueError("log axis needs positive values")
        ys = np.log10(ys)
    finite = ys[np.isfinite(ys)]
    lo, hi = (ylim if ylim is not None else (finite.min(), finite.max()))
    if logy and ylim is not None:
        lo, hi = np.log10(lo), np.log10(hi)
    pad = 0.05 * (hi - lo or 1.0)
    frame = _Frame((xs.min(), xs.max()), (lo - pad, hi + pad))
    body = frame.axes(title, xlabel, ylabel, (lambda v: f"1e{v:.2g}") if logy else _tick_label)
    clip_id = "plot-area"
    body.append(
        f'<clipPath id="{clip_id}"><rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" '
        f'width="{frame.pw}" height="{frame.ph}"/></clipPath>'
    )
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        y = np.asarray(s.y, float)
        y = np.log10(y) if logy else y
        px, py = frame.px(np.asarray(s.x, float)), frame.py(y)
        ok = np.isfinite(py)
        if s.markers:
            for a, b in zip(px[ok], py[ok]):
                body.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="3.5" fill="{color}"/>')
        else:
            pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(px[ok], py[ok]))
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            body.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"{dash} '
                f'clip-path="url(#{clip_id})"/>'
            )
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 12
        body.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{lx + 28}" y="{ly}" font-size="11">{escape(s.label)}</text>')
    return _document(WIDTH, HEIGHT, body)


def _colormap(v: np.ndarray, diverging: bool) -> list:
    """Map values in [0, 1] to hex colors (blue-white-red or dark-to-yellow); NaN is white."""
    out = []
    for t in np.clip(v, 0.0, 1.0).ravel():
        if not np.isfinite(t):
            out.append("#ffffff")
            continue
        if diverging:
            if t < 0.5:
                s = t / 0.5
                r, g, b = 40 + 215 * s, 80 + 175 * s, 200 + 55 * s
            else:
                s = (t - 0.5) / 0.5
                r, g, b = 255, 255 - 200 * s, 255 - 215 * s
        else:
            r, g, b = 30 + 225 * t, 20 + 200 * t, 90 - 60 * t
        out.append(f"#{int(r):02x}{int(g):02x}{int(b):02x}")
    return out


def heatmap(
    Z,
    x: Sequence[float],
    y: Sequence[float],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    diverging: bool = False,
    max_cells: int = 120,
) -> str:
    """Heatmap of ``Z[i, j]`` at ``(x[j], y[i])``, downsampled to at most ``max_cells`` per side."""
    Z = np.asarray(Z, float)
    x, y = np.asarray(x, float), np.asarray(y, float)
    if Z.shape != (len(y), len(x)):
        raise ValueError(f"Z has shape {Z.shape}, expected {(len(y), len(x))}")
    si = max(1, int(np.ceil(len(y) / max_cells)))
    sj = max(1, int(np.ceil(len(x) / max_cells)))
    Z, x, y = Z[::si, ::sj], x[::sj], y[::si]
    if diverging:
        m = np.nanmax(np.abs(Z)) or 1.0
        lo, hi = -m, m
    else:
        lo, hi = np.nanmin(Z), np.nanmax(Z)
    norm = (Z - lo) / ((hi - lo) or 1.0)
    frame = _Frame((x.min(), x.max()), (y.min(), y.max()))
    body = frame.axes(title, xlabel, ylabel)
    cw = frame.pw / len(x)
    ch = frame.ph / len(y)
    colors = np.array(_colormap(norm, diverging)).reshape(Z.shape)
    for i in range(len(y)):
        top = MARGIN["top"] + (len(y) - 1 - i) * ch
        for j in range(len(x)):
            left = MARGIN["left"] + j * cw
            body.append(
                f'<rect x="{_f(left)}" y="{_f(top)}" width="{_f(cw + 0.3)}" height="{_f(ch + 0.3)}" '
                f'fill="{colors[i, j]}"/>'
            )
    # color bar
    bx = WIDTH - MARGIN["right"] + 25
    steps = 40
    for k in range(steps):
        t = 1 - k / (steps - 1)
        c = _colormap(np.array([t]), diverging)[0]
        body.append(
            f'<rect x="{bx}" y="{_f(MARGIN["top"] + k * frame.ph / steps)}" width="18" '
            f'height="{_f(frame.ph / steps + 0.5)}" fill="{c}"/>'
        )
    body.append(f'<text x="{bx + 24}" y="{MARGIN["top"] + 10}" font-size="11">{_tick_label(hi)}</text>')
    body.append(f'<text x="{bx + 24}" y="{MARGIN["top"] + frame.ph}" font-size="11">{_tick_label(lo)}</text>')
    return _document(WIDTH, HEIGHT, body)


def write(path, svg: str) -> Path:
    path = Path(path)
    path.write_text(svg)
    return path
