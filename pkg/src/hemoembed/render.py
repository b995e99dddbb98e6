"""Plain-SVG figures: cluster timelines and confusion-matrix heatmaps."""
from __future__ import annotations

from html import escape

import numpy as np

# label id -> colour; fixed so figures are comparable across runs
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
    "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7",
)


def label_color(label: int) -> str:
    return PALETTE[int(label) % len(PALETTE)]


def _num(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def timeline_svg(timeline, width: int = 960, band: int = 16, gap: int = 6) -> str:
    """One band per subject; x is seconds from bleed start, t=0 is marked.

    ``timeline`` is a :class:`~hemoembed.pipeline.ClusterTimeline`.
    """
    subjects = list(timeline.entries)
    left, right, top = 90, 20, 30
    all_t = [e.seconds_from_bleed for s in subjects for e in timeline.entries[s]]
    dur = timeline.window_seconds
    t0 = min(all_t)
    t1 = max(all_t) + dur
    span = max(t1 - t0, 1e-9)
    plot_w = width - left - right

    def x(t):
        return left + (t - t0) / span * plot_w

    height = top + len(subjects) * (band + gap) + 40
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="16">{escape(timeline.method)} clusters, k={timeline.k}</text>',
    ]
    for row, s in enumerate(subjects):
        y = top + row * (band + gap)
        tag = timeline.tags.get(s, "")
        label = f"{s} ({tag})" if tag else s
        out.append(f'<text x="4" y="{y + band - 4}">{escape(label)}</text>')
        entries = timeline.entries[s]
        i = 0
        while i < len(entries):
            j = i
            while j + 1 < len(entries) and entries[j + 1].label == entries[i].label:
                j += 1
            xa = x(entries[i].seconds_from_bleed)
            xb = x(entries[j].seconds_from_bleed + dur)
            out.append(
                f'<rect x="{_num(xa)}" y="{y}" width="{_num(max(xb - xa, 0.5))}" height="{band}" '
                f'fill="{label_color(entries[i].label)}"/>'
            )
            i = j + 1
        for t in timeline.draw_seconds.get(s, ()):
            out.append(f'<circle cx="{_num(x(t))}" cy="{y + band / 2}" r="3" fill="black"/>')
    zero = x(0.0)
    bottom = top + len(subjects) * (band + gap)
    out.append(f'<line x1="{_num(zero)}" y1="{top - 4}" x2="{_num(zero)}" y2="{bottom}" stroke="black" stroke-dasharray="4 2"/>')
    out.append(f'<text x="{_num(zero - 8)}" y="{bottom + 14}">t=0</text>')
    out.append(f'<text x="{left}" y="{bottom + 14}">{_num(t0)} s</text>')
    out.append(f'<text x="{width - right - 50}" y="{bottom + 14}">{_num(t1)} s</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def confusion_svg(matrix, title: str = "", cell: int = 36) -> str:
    """Heatmap of a confusion matrix (rows true, columns predicted)."""
    m = np.asarray(matrix)
    k = m.shape[0]
    left, top = 60, 40
    width = left + k * cell + 20
    height = top + k * cell + 40
    peak = max(int(m.max()), 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="4" y="16">{escape(title)}</text>',
        f'<text x="{left}" y="{top - 6}">predicted</text>',
        f'<text x="4" y="{top + 12}">true</text>',
    ]
    for i in range(k):
        out.append(f'<text x="{left - 16}" y="{top + i * cell + cell / 2 + 4}">{i}</text>')
        out.append(f'<text x="{left + i * cell + cell / 2 - 4}" y="{top + k * cell + 14}">{i}</text>')
        for j in range(k):
            v = int(m[i, j])
            shade = int(255 - 200 * v / peak)
            colour = f"rgb({shade},{shade},255)"
            out.append(
                f'<rect x="{left + j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                f'fill="{colour}" stroke="white"/>'
            )
            out.append(f'<text x="{left + j * cell + 4}" y="{top + i * cell + cell / 2 + 4}">{v}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
