"""Static SVG rendering of orientation fields and model singular points.

Each sampled foreground cell becomes a line segment of length 0.8x the grid
spacing, rotated to its orientation; cores are drawn as circles and deltas
as triangles.  World y points up, so coordinates are flipped into SVG space.
"""

from __future__ import annotations

import math
from io import StringIO

import numpy as np

from .anchors import XqdModel, evaluate_xqd_field
from .field import GridSpec, OrientationField

SEGMENT_FRACTION = 0.8


def _canvas(grid: GridSpec) -> tuple[float, float]:
    return (grid.cols * grid.spacing_px, grid.rows * grid.spacing_px)


def field_segments(field: OrientationField, stride: int = 1):
    """(x1, y1, x2, y2) world-space segments for sampled foreground cells."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    grid = field.grid
    half = SEGMENT_FRACTION * grid.spacing_px / 2.0
    for r in range(0, grid.rows, stride):
        for c in range(0, grid.cols, stride):
            if not field.mask[r, c]:
                continue
            x, y = grid.cell_center(c, r)
            a = field.angles[r, c]
            dx, dy = half * math.cos(a), half * math.sin(a)
            yield (x - dx, y - dy, x + dx, y + dy)


def render_field_svg(field: OrientationField, stride: int = 1,
                     cores=(), deltas=()) -> str:
    """SVG document for a field, optionally with singular-point markers."""
    grid = field.grid
    width, height = _canvas(grid)

    def fy(y: float) -> float:
        return height - y

    out = StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
        f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">\n'
    )
    out.write('<g stroke="#222" stroke-width="1.2" stroke-linecap="round">\n')
    for (x1, y1, x2, y2) in field_segments(field, stride):
        out.write(f'<line x1="{x1:.2f}" y1="{fy(y1):.2f}" '
                  f'x2="{x2:.2f}" y2="{fy(y2):.2f}"/>\n')
    out.write("</g>\n")
    marker_r = 0.5 * grid.spacing_px
    for (x, y) in cores:
        out.write(f'<circle cx="{x:.2f}" cy="{fy(y):.2f}" r="{marker_r:.2f}" '
                  f'fill="none" stroke="#c00" stroke-width="2"/>\n')
    for (x, y) in deltas:
        pts = []
        for k in range(3):
            ang = math.pi / 2 + 2 * math.pi * k / 3
            pts.append(f"{x + marker_r * math.cos(ang):.2f},"
                       f"{fy(y + marker_r * math.sin(ang)):.2f}")
        out.write(f'<polygon points="{" ".join(pts)}" fill="none" '
                  f'stroke="#06c" stroke-width="2"/>\n')
    out.write("</svg>\n")
    return out.getvalue()


def render_model_svg(model: XqdModel, grid: GridSpec, stride: int = 1,
                     mask: np.ndarray | None = None) -> str:
    """Evaluate the model on a grid and render it with its singular points."""
    field = evaluate_xqd_field(model, grid, mask)
    return render_field_svg(
        field, stride=stride,
        cores=model.qd.core_world_positions(),
        deltas=model.qd.delta_world_positions(),
    )


def grid_from_model_header(model: XqdModel) -> GridSpec:
    """Reconstruct the sampling grid from the encoded header metadata."""
    if model.grid_spacing_px <= 0 or model.image_width_px <= 0 or model.image_height_px <= 0:
        raise ValueError("model header carries no grid metadata")
    spacing = float(model.grid_spacing_px)
    return GridSpec(
        cols=max(1, int(model.image_width_px / spacing)),
        rows=max(1, int(model.image_height_px / spacing)),
        spacing_px=spacing,
        origin_px=(spacing / 2.0, spacing / 2.0),
    )
