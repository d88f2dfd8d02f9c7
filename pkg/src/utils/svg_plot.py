"""
Minimal SVG line/step/point plots for run reports.

Output is plain text with fixed number formatting, so the same data always
renders to the same bytes.
"""

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple
from xml.sax.saxutils import escape

WIDTH = 800
HEIGHT = 400
MARGIN_LEFT = 70
MARGIN_RIGHT = 150
MARGIN_TOP = 40
MARGIN_BOTTOM = 50
AXIS_TICKS = 5
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


@dataclass
class Series:
    """
    Attributes:
        label: Legend text
        points: (x, y) pairs in ascending x
        style: "line", "step" or "points"
    """

    label: str
    points: List[Tuple[float, float]] = field(default_factory=list)
    style: str = "line"


@dataclass
class Guide:
    """Horizontal reference line."""

    value: float
    label: str


def _bounds(values: Sequence[float]) -> Tuple[float, float]:
    low, high = min(values), max(values)
    if math.isclose(low, high):
        return low - 1.0, high + 1.0
    pad = (high - low) * 0.05
    return low - pad, high + pad


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def render_plot(title: str, x_label: str, y_label: str, series: Sequence[Series],
                guides: Sequence[Guide] = ()) -> str:
    """
    Render one chart as an SVG document.

    Empty series are kept in the legend but draw nothing. With no data at all
    the axes span [-1, 1].
    """
    xs = [x for s in series for x, _ in s.points] or [0.0]
    ys = [y for s in series for _, y in s.points] + [g.value for g in guides] or [0.0]
    x_min, x_max = (xs[0] - 1.0, xs[0] + 1.0) if min(xs) == max(xs) else (min(xs), max(xs))
    y_min, y_max = _bounds(ys)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x: float) -> float:
        return MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w

    def sy(y: float) -> float:
        return MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333"/>',
    ]

    for index in range(AXIS_TICKS + 1):
        fraction = index / AXIS_TICKS
        x_value = x_min + fraction * (x_max - x_min)
        y_value = y_min + fraction * (y_max - y_min)
        px, py = sx(x_value), sy(y_value)
        parts.append(f'<line x1="{px:.2f}" y1="{MARGIN_TOP + plot_h}" x2="{px:.2f}" '
                     f'y2="{MARGIN_TOP + plot_h + 5}" stroke="#333"/>')
        parts.append(f'<text x="{px:.2f}" y="{MARGIN_TOP + plot_h + 18}" text-anchor="middle">{_fmt(x_value)}</text>')
        parts.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{py:.2f}" x2="{MARGIN_LEFT}" y2="{py:.2f}" stroke="#333"/>')
        parts.append(f'<text x="{MARGIN_LEFT - 8}" y="{py + 4:.2f}" text-anchor="end">{_fmt(y_value)}</text>')
    parts.append(f'<text x="{MARGIN_LEFT + plot_w / 2:.1f}" y="{HEIGHT - 10}" '
                 f'text-anchor="middle">{escape(x_label)}</text>')
    parts.append(f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2:.1f})">{escape(y_label)}</text>')

    for guide in guides:
        py = sy(guide.value)
        parts.append(f'<line x1="{MARGIN_LEFT}" y1="{py:.2f}" x2="{MARGIN_LEFT + plot_w}" y2="{py:.2f}" '
                     f'stroke="#999" stroke-dasharray="6 4"/>')
        parts.append(f'<text x="{MARGIN_LEFT + plot_w - 4}" y="{py - 4:.2f}" text-anchor="end" '
                     f'fill="#666">{escape(guide.label)}</text>')

    for index, s in enumerate(series):
        color = PALETTE[index % len(PALETTE)]
        if s.points:
            if s.style == "points":
                for x, y in s.points:
                    parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
            else:
                coordinates = []
                previous_y = None
                for x, y in s.points:
                    if s.style == "step" and previous_y is not None:
                        coordinates.append(f"{sx(x):.2f},{sy(previous_y):.2f}")
                    coordinates.append(f"{sx(x):.2f},{sy(y):.2f}")
                    previous_y = y
                parts.append(f'<polyline points="{" ".join(coordinates)}" fill="none" '
                             f'stroke="{color}" stroke-width="1.5"/>')
        legend_y = MARGIN_TOP + 12 + index * 18
        legend_x = MARGIN_LEFT + plot_w + 12
        parts.append(f'<line x1="{legend_x}" y1="{legend_y - 4}" x2="{legend_x + 18}" y2="{legend_y - 4}" '
                     f'stroke="{color}" stroke-width="3"/>')
        parts.append(f'<text x="{legend_x + 24}" y="{legend_y}">{escape(s.label)}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_plot(path: str, title: str, x_label: str, y_label: str, series: Sequence[Series],
               guides: Sequence[Guide] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as svg_file:
        svg_file.write(render_plot(title, x_label, y_label, series, guides))
