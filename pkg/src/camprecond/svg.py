"""Deterministic SVG heatmaps for square matrices."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

CELL = 32
LABEL_W = 72
TITLE_H = 28


def _ramp(t: float) -> str:
    """Blue-white-red diverging colour for ``t`` in [-1, 1]."""
    t = max(-1.0, min(1.0, t))
    if t < 0:
        r, g, b = 1.0 + t * (1.0 - 0.129), 1.0 + t * (1.0 - 0.4), 1.0 + t * (1.0 - 0.737)
    else:
        r, g, b = 1.0 - t * (1.0 - 0.698), 1.0 - t * (1.0 - 0.094), 1.0 - t * (1.0 - 0.169)
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in (r, g, b))


def _fmt(x: float) -> str:
    if x == 0:
        return "0"
    return f"{x:.2g}" if 1e-2 <= abs(x) < 1e3 else f"{x:.1e}"


def heatmap(matrix, labels: list[str], title: str = "") -> str:
    """Render ``matrix`` with a symmetric colour scale ``[-max|A|, max|A|]``.

    Cells are annotated with their values when the matrix has at most 16 rows.
    """
    A = np.asarray(matrix, dtype=np.float64)
    k = A.shape[0]
    if A.shape != (k, k) or len(labels) != k:
        raise ValueError("heatmap needs a square matrix and one label per row")
    scale = float(np.max(np.abs(A))) or 1.0
    width = LABEL_W + k * CELL + 8
    height = TITLE_H + LABEL_W + k * CELL + 8
    x0, y0 = LABEL_W, TITLE_H + LABEL_W
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="9">',
        f'<text x="4" y="18" font-size="13">{escape(title)}</text>',
    ]
    for i, name in enumerate(labels):
        cy = y0 + i * CELL + CELL // 2 + 3
        cx = x0 + i * CELL + CELL // 2
        out.append(f'<text x="{x0 - 4}" y="{cy}" text-anchor="end">{escape(name)}</text>')
        out.append(
            f'<text x="{cx}" y="{y0 - 4}" transform="rotate(-60 {cx} {y0 - 4})">{escape(name)}</text>'
        )
    for i in range(k):
        for j in range(k):
            v = A[i, j]
            x, y = x0 + j * CELL, y0 + i * CELL
            out.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{_ramp(v / scale)}"/>')
            if k <= 16:
                colour = "#ffffff" if abs(v / scale) > 0.6 else "#000000"
                out.append(
                    f'<text x="{x + CELL // 2}" y="{y + CELL // 2 + 3}" text-anchor="middle" '
                    f'font-size="7" fill="{colour}">{_fmt(v)}</text>'
                )
    out.append("</svg>")
    return "\n".join(out) + "\n"
