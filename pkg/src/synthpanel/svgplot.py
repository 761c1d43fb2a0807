"""Minimal deterministic SVG line charts with an optional shaded band."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

_WIDTH = 720
_HEIGHT = 440
_MARGIN_LEFT = 64
_MARGIN_RIGHT = 16
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 48

_PALETTE = ("#111111", "#c0392b", "#2e6da4", "#55a868", "#8172b2", "#937860")


@dataclass
class LineChart:
    """Accumulates series and renders a fixed-size SVG string.

    All coordinates are formatted with fixed precision so identical data
    always yields identical bytes.
    """

    title: str
    x_label: str = ""
    y_label: str = ""
    series: list = field(default_factory=list)   # (label, xs, ys, color)
    band: tuple | None = None                    # (xs, lo, hi)
    vline: float | None = None
    hline: float | None = None

    def add_series(self, label: str, xs: Sequence[float], ys: Sequence[float], color: str | None = None):
        if color is None:
            color = _PALETTE[len(self.series) % len(_PALETTE)]
        self.series.append((label, list(xs), list(ys), color))

    def add_band(self, xs: Sequence[float], lo: Sequence[float], hi: Sequence[float]):
        self.band = (list(xs), list(lo), list(hi))

    def _extent(self):
        xs, ys = [], []
        for _, sx, sy, _ in self.series:
            xs.extend(sx)
            ys.extend(sy)
        if self.band is not None:
            bx, blo, bhi = self.band
            xs.extend(bx)
            ys.extend(blo)
            ys.extend(bhi)
        if self.hline is not None:
            ys.append(self.hline)
        if self.vline is not None:
            xs.append(self.vline)
        if not xs or not ys:
            xs, ys = [0.0, 1.0], [0.0, 1.0]
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
        pad = 0.05 * (y_hi - y_lo)
        return x_lo, x_hi, y_lo - pad, y_hi + pad

    def render(self) -> str:
        x_lo, x_hi, y_lo, y_hi = self._extent()
        plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
        plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

        def px(x):
            return _MARGIN_LEFT + plot_w * (x - x_lo) / (x_hi - x_lo)

        def py(y):
            return _MARGIN_TOP + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
            f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
            f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>',
            f'<text x="{_WIDTH / 2:.1f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{_escape(self.title)}</text>',
        ]
        if self.band is not None:
            bx, blo, bhi = self.band
            pts = [f"{px(x):.2f},{py(y):.2f}" for x, y in zip(bx, bhi)]
            pts += [f"{px(x):.2f},{py(y):.2f}" for x, y in zip(reversed(bx), reversed(blo))]
            out.append(f'<polygon points="{" ".join(pts)}" fill="#cccccc" fill-opacity="0.6"/>')
        if self.hline is not None:
            y = py(self.hline)
            out.append(
                f'<line x1="{px(x_lo):.2f}" y1="{y:.2f}" x2="{px(x_hi):.2f}" y2="{y:.2f}" '
                f'stroke="#888888" stroke-width="1" stroke-dasharray="4,3"/>'
            )
        if self.vline is not None:
            x = px(self.vline)
            out.append(
                f'<line x1="{x:.2f}" y1="{py(y_lo):.2f}" x2="{x:.2f}" y2="{py(y_hi):.2f}" '
                f'stroke="#555555" stroke-width="1" stroke-dasharray="4,3"/>'
            )
        for label, sx, sy, color in self.series:
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>'
            )
        # axes
        out.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP + plot_h}" '
            f'x2="{_MARGIN_LEFT + plot_w}" y2="{_MARGIN_TOP + plot_h}" stroke="#000000"/>'
        )
        out.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" '
            f'x2="{_MARGIN_LEFT}" y2="{_MARGIN_TOP + plot_h}" stroke="#000000"/>'
        )
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            xv = x_lo + frac * (x_hi - x_lo)
            yv = y_lo + frac * (y_hi - y_lo)
            out.append(
                f'<text x="{px(xv):.2f}" y="{_MARGIN_TOP + plot_h + 18}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{xv:.3g}</text>'
            )
            out.append(
                f'<text x="{_MARGIN_LEFT - 6}" y="{py(yv) + 4:.2f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{yv:.3g}</text>'
            )
        if self.x_label:
            out.append(
                f'<text x="{_MARGIN_LEFT + plot_w / 2:.1f}" y="{_HEIGHT - 10}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="12">{_escape(self.x_label)}</text>'
            )
        if self.y_label:
            out.append(
                f'<text x="16" y="{_MARGIN_TOP + plot_h / 2:.1f}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="12" '
                f'transform="rotate(-90 16 {_MARGIN_TOP + plot_h / 2:.1f})">{_escape(self.y_label)}</text>'
            )
        legend_y = _MARGIN_TOP + 6
        for label, _, _, color in self.series:
            if not label:
                continue
            out.append(
                f'<line x1="{_MARGIN_LEFT + 8}" y1="{legend_y:.2f}" x2="{_MARGIN_LEFT + 30}" '
                f'y2="{legend_y:.2f}" stroke="{color}" stroke-width="2"/>'
            )
            out.append(
                f'<text x="{_MARGIN_LEFT + 36}" y="{legend_y + 4:.2f}" font-family="sans-serif" '
                f'font-size="11">{_escape(label)}</text>'
            )
            legend_y += 16
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
