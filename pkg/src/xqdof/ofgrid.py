"""Plain-text orientation grids (.xof) and dense-field <-> sparse-mark conversion.

Format: a header line "XOF1 <cols> <rows> <spacing_px>" followed by <rows>
lines of <cols> whitespace-separated tokens, each a degree value in [0, 180)
or "*" for background.  Cell (0, 0) sits at pixel (spacing/2, spacing/2).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import OfGridParseError
from .field import GridSpec, Mark, OrientationField, wrap_half_pi

HEADER_TAG = "XOF1"
BACKGROUND_TOKEN = "*"


def read_of_grid(text: str) -> OrientationField:
    """Parse a .xof document; raises OfGridParseError with line/column info."""
    lines = text.splitlines()
    if not lines:
        raise OfGridParseError("empty document", line=1)
    header = lines[0].split()
    if len(header) != 4 or header[0] != HEADER_TAG:
        raise OfGridParseError(
            f"header must be '{HEADER_TAG} <cols> <rows> <spacing>', got {lines[0]!r}", line=1
        )
    try:
        cols, rows = int(header[1]), int(header[2])
        spacing = float(header[3])
    except ValueError:
        raise OfGridParseError("header counts/spacing are not numeric", line=1) from None
    try:
        grid = GridSpec(cols=cols, rows=rows, spacing_px=spacing,
                        origin_px=(spacing / 2.0, spacing / 2.0))
    except ValueError as exc:
        raise OfGridParseError(str(exc), line=1) from None

    tokens: list[tuple[str, int, int]] = []  # (token, line, column)
    for lineno, line in enumerate(lines[1:], start=2):
        for colno, tok in enumerate(line.split(), start=1):
            tokens.append((tok, lineno, colno))
    if len(tokens) != rows * cols:
        raise OfGridParseError(
            f"expected {rows * cols} cell tokens, found {len(tokens)}",
            line=len(lines),
        )

    angles = np.zeros((rows, cols), dtype=float)
    mask = np.zeros((rows, cols), dtype=bool)
    for idx, (tok, lineno, colno) in enumerate(tokens):
        r, c = divmod(idx, cols)
        if tok == BACKGROUND_TOKEN:
            continue
        try:
            deg = float(tok)
        except ValueError:
            raise OfGridParseError(f"bad token {tok!r}", line=lineno, column=colno) from None
        if not math.isfinite(deg) or not (0.0 <= deg < 180.0):
            raise OfGridParseError(
                f"degree value {tok} outside [0, 180)", line=lineno, column=colno
            )
        angles[r, c] = wrap_half_pi(math.radians(deg))
        mask[r, c] = True
    return OrientationField(grid=grid, angles=angles, mask=mask)


def write_of_grid(field: OrientationField) -> str:
    """Serialize a field; inverse of read_of_grid to within 1e-4 degree."""
    grid = field.grid
    out = [f"{HEADER_TAG} {grid.cols} {grid.rows} {grid.spacing_px:g}"]
    for r in range(grid.rows):
        row = []
        for c in range(grid.cols):
            if field.mask[r, c]:
                deg = math.degrees(field.angles[r, c]) % 180.0
                if deg >= 180.0:  # fp edge: x % 180 can round to 180
                    deg = 0.0
                row.append(f"{deg:.6f}")
            else:
                row.append(BACKGROUND_TOKEN)
        out.append(" ".join(row))
    return "\n".join(out) + "\n"


def field_to_marks(field: OrientationField) -> list[Mark]:
    """One mark per foreground cell, positioned at the cell's pixel center."""
    marks = []
    for r in range(field.grid.rows):
        for c in range(field.grid.cols):
            if field.mask[r, c]:
                x, y = field.grid.cell_center(c, r)
                marks.append(Mark(x=x, y=y, theta=float(field.angles[r, c])))
    return marks
