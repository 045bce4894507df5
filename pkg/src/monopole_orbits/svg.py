"""Minimal hand-written SVG line plots (no plotting dependency)."""

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Panel:
    """One set of axes holding polylines and markers."""

    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    equal: bool = False
    lines: list = field(default_factory=list)
    points: list = field(default_factory=list)

    def line(self, x, y, label=""):
        self.lines.append((np.asarray(x, float), np.asarray(y, float), label))
        return self

    def scatter(self, x, y, label=""):
        self.points.append((np.asarray(x, float), np.asarray(y, float), label))
        return self


def _fmt(v):
    return f"{v:.2f}"


def _limits(panel):
    xs = [a for a, _, _ in panel.lines + panel.points]
    ys = [b for _, b, _ in panel.lines + panel.points]
    if not xs:
        return (0.0, 1.0), (0.0, 1.0)
    x = np.concatenate([a[np.isfinite(a)] for a in xs])
    y = np.concatenate([b[np.isfinite(b)] for b in ys])
    x0, x1 = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    y0, y1 = (float(y.min()), float(y.max())) if y.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    if panel.equal:
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        half = 0.5 * max(x1 - x0, y1 - y0)
        x0, x1, y0, y1 = cx - half, cx + half, cy - half, cy + half
    padx, pady = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
    return (x0 - padx, x1 + padx), (y0 - pady, y1 + pady)


def _panel_svg(panel, ox, oy, w, h):
    (x0, x1), (y0, y1) = _limits(panel)
    left, right, top, bottom = 60, 15, 30, 45
    pw, ph = w - left - right, h - top - bottom

    def sx(v):
        return ox + left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return oy + top + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<rect x="{_fmt(ox + left)}" y="{_fmt(oy + top)}" width="{_fmt(pw)}" height="{_fmt(ph)}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
        f'<text x="{_fmt(ox + w / 2)}" y="{_fmt(oy + 18)}" text-anchor="middle" font-size="14">'
        f"{escape(panel.title)}</text>",
        f'<text x="{_fmt(ox + left + pw / 2)}" y="{_fmt(oy + h - 8)}" text-anchor="middle" '
        f'font-size="12">{escape(panel.xlabel)}</text>',
        f'<text x="{_fmt(ox + 14)}" y="{_fmt(oy + top + ph / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 {_fmt(ox + 14)} {_fmt(oy + top + ph / 2)})">{escape(panel.ylabel)}</text>',
    ]
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(
            f'<text x="{_fmt(sx(v))}" y="{_fmt(oy + top + ph + 14)}" text-anchor="{anchor}" '
            f'font-size="10">{v:.3g}</text>'
        )
    for v in (y0, y1):
        out.append(
            f'<text x="{_fmt(ox + left - 4)}" y="{_fmt(sy(v) + 4)}" text-anchor="end" font-size="10">{v:.3g}</text>'
        )
    for i, (x, y, label) in enumerate(panel.lines):
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x[ok], y[ok]))
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{_COLORS[i % len(_COLORS)]}" stroke-width="1.2">'
            f"<title>{escape(label)}</title></polyline>"
        )
    for i, (x, y, label) in enumerate(panel.points):
        color = _COLORS[(i + len(panel.lines)) % len(_COLORS)]
        for a, b in zip(x, y):
            if np.isfinite(a) and np.isfinite(b):
                out.append(f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}" r="2" fill="{color}"/>')
    return out


def render(panels, width=420, height=380):
    """Render panels side by side and return the SVG document as text."""
    total = width * len(panels)
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{height}" '
        f'viewBox="0 0 {total} {height}" font-family="sans-serif">',
        f'<rect width="{total}" height="{height}" fill="white"/>',
    ]
    for i, p in enumerate(panels):
        body.extend(_panel_svg(p, i * width, 0, width, height))
    body.append("</svg>")
    return "\n".join(body) + "\n"
