"""Tiny deterministic SVG canvas.

Fixed geometry, monospace font, no timestamps or generated ids: the output
bytes are a pure function of what gets drawn.
"""

from __future__ import annotations

import math

WIDTH = 640
HEIGHT = 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 78, 24, 46, 56


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class Canvas:
    def __init__(self, title: str = "", xlabel: str = "", ylabel: str = ""):
        self.elements: list[str] = []
        self.x_lo = 0.0
        self.x_hi = 1.0
        self.y_lo = 0.0
        self.y_hi = 1.0
        self.x_log = False
        self.y_log = False
        if title:
            self.elements.append(
                f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" '
                f'font-size="14">{_esc(title)}</text>')
        if xlabel:
            self.elements.append(
                f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:.0f}" y="{HEIGHT - 14}" '
                f'text-anchor="middle" font-size="12">{_esc(xlabel)}</text>')
        if ylabel:
            cy = (MARGIN_T + HEIGHT - MARGIN_B) / 2
            self.elements.append(
                f'<text x="18" y="{cy:.0f}" text-anchor="middle" font-size="12" '
                f'transform="rotate(-90 18 {cy:.0f})">{_esc(ylabel)}</text>')

    def set_limits(self, x_lo, x_hi, y_lo, y_hi, x_log=False, y_log=False):
        if x_log:
            x_lo, x_hi = math.log10(x_lo), math.log10(x_hi)
        if y_log:
            y_lo, y_hi = math.log10(y_lo), math.log10(y_hi)
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0
        if y_hi <= y_lo:
            y_hi = y_lo + 1.0
        self.x_lo, self.x_hi, self.y_lo, self.y_hi = x_lo, x_hi, y_lo, y_hi
        self.x_log, self.y_log = x_log, y_log

    def px(self, x: float) -> float:
        v = math.log10(x) if self.x_log else x
        frac = (v - self.x_lo) / (self.x_hi - self.x_lo)
        return MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y: float) -> float:
        v = math.log10(y) if self.y_log else y
        frac = (v - self.y_lo) / (self.y_hi - self.y_lo)
        return HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)

    def frame(self):
        self.elements.append(
            f'<rect x="{MARGIN_L}" y="{MARGIN_T}" '
            f'width="{WIDTH - MARGIN_L - MARGIN_R}" '
            f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" stroke="#333"/>')

    def x_ticks(self, values, labels=None):
        labels = labels or [f"{v:g}" for v in values]
        y0 = HEIGHT - MARGIN_B
        for v, lab in zip(values, labels):
            x = self.px(v)
            self.elements.append(
                f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 5}" '
                f'stroke="#333"/>')
            self.elements.append(
                f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle" '
                f'font-size="10">{_esc(lab)}</text>')

    def y_ticks(self, values, labels=None):
        labels = labels or [f"{v:g}" for v in values]
        for v, lab in zip(values, labels):
            y = self.py(v)
            self.elements.append(
                f'<line x1="{MARGIN_L - 5}" y1="{_fmt(y)}" x2="{MARGIN_L}" '
                f'y2="{_fmt(y)}" stroke="#333"/>')
            self.elements.append(
                f'<text x="{MARGIN_L - 8}" y="{_fmt(y + 3)}" text-anchor="end" '
                f'font-size="10">{_esc(lab)}</text>')

    def polyline(self, points, stroke="#1f77b4", width=1.6, dash=None, elem_id=None):
        pts = " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in points)
        attrs = f'points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"'
        if dash:
            attrs += f' stroke-dasharray="{dash}"'
        if elem_id:
            attrs += f' id="{elem_id}"'
        self.elements.append(f"<polyline {attrs}/>")

    def polygon(self, points, fill="#1f77b4", opacity=0.18, elem_id=None):
        pts = " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in points)
        attrs = f'points="{pts}" fill="{fill}" fill-opacity="{opacity}" stroke="none"'
        if elem_id:
            attrs += f' id="{elem_id}"'
        self.elements.append(f"<polygon {attrs}/>")

    def circle(self, x, y, r=3.0, fill="#1f77b4"):
        self.elements.append(
            f'<circle cx="{_fmt(self.px(x))}" cy="{_fmt(self.py(y))}" r="{r}" '
            f'fill="{fill}"/>')

    def rect_data(self, x0, y0, x1, y1, fill, elem_id=None):
        xa, xb = sorted((self.px(x0), self.px(x1)))
        ya, yb = sorted((self.py(y0), self.py(y1)))
        attrs = (f'x="{_fmt(xa)}" y="{_fmt(ya)}" width="{_fmt(xb - xa)}" '
                 f'height="{_fmt(yb - ya)}" fill="{fill}"')
        if elem_id:
            attrs += f' id="{elem_id}"'
        self.elements.append(f"<rect {attrs}/>")

    def label(self, x_px, y_px, text, size=11, anchor="start", fill="#333"):
        self.elements.append(
            f'<text x="{_fmt(x_px)}" y="{_fmt(y_px)}" text-anchor="{anchor}" '
            f'font-size="{size}" fill="{fill}">{_esc(text)}</text>')

    def to_string(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" '
            f'font-family="DejaVu Sans Mono, monospace">\n'
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
        return head + "\n".join(self.elements) + "\n</svg>\n"
