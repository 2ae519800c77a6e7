"""Grid types and arithmetic on undirected orientation angles.

Orientations are undirected: an angle and its offset by any multiple of pi
describe the same ridge direction.  Internally every angle lives in
[-pi/2, pi/2) radians; degrees appear only at I/O boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMaskError, GridMismatchError, InvalidAngleError

HALF_PI = math.pi / 2.0


def wrap_half_pi(angle: float) -> float:
    """Wrap an angle in radians to the canonical range [-pi/2, pi/2).

    The result is congruent to the input modulo pi.  Raises
    InvalidAngleError for NaN or infinite input.
    """
    if not math.isfinite(angle):
        raise InvalidAngleError(f"cannot wrap non-finite angle {angle!r}")
    wrapped = angle - math.pi * math.floor(angle / math.pi + 0.5)
    # floor() rounding can land exactly on +pi/2; fold it to the lower bound.
    if wrapped >= HALF_PI:
        wrapped -= math.pi
    return wrapped


def wrap_half_pi_array(angles: np.ndarray) -> np.ndarray:
    """Vectorized wrap_half_pi over a float array (no finiteness check)."""
    a = np.asarray(angles, dtype=float)
    wrapped = a - np.pi * np.floor(a / np.pi + 0.5)
    return np.where(wrapped >= HALF_PI, wrapped - np.pi, wrapped)


def angular_deviation(a: float, b: float) -> float:
    """Undirected angular distance between two orientations, in degrees [0, 90]."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidAngleError("angular_deviation requires finite angles")
    return abs(wrap_half_pi(a - b)) * 180.0 / math.pi


@dataclass(frozen=True)
class GridSpec:
    """Rectangular sampling grid: cell (col, row) sits at origin + index*spacing."""

    cols: int
    rows: int
    spacing_px: float
    origin_px: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.cols}x{self.rows}")
        if self.spacing_px < 1:
            raise ValueError(f"grid spacing must be >= 1 px, got {self.spacing_px}")

    def cell_center(self, col: int, row: int) -> tuple[float, float]:
        ox, oy = self.origin_px
        return (ox + col * self.spacing_px, oy + row * self.spacing_px)

    def xy_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel coordinates of every cell center as (rows, cols) arrays."""
        ox, oy = self.origin_px
        xs = ox + np.arange(self.cols, dtype=float) * self.spacing_px
        ys = oy + np.arange(self.rows, dtype=float) * self.spacing_px
        return np.meshgrid(xs, ys)


@dataclass
class OrientationField:
    """Per-cell undirected angles (radians, [-pi/2, pi/2)) plus a foreground mask.

    Angles at background cells are sentinels and are never read by any metric.
    """

    grid: GridSpec
    angles: np.ndarray  # float (rows, cols)
    mask: np.ndarray  # bool (rows, cols)

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        shape = (self.grid.rows, self.grid.cols)
        if self.angles.shape != shape or self.mask.shape != shape:
            raise ValueError(
                f"angles/mask shape {self.angles.shape}/{self.mask.shape} "
                f"does not match grid {shape}"
            )

    def foreground_count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class Mark:
    """A sparse orientation sample: position in pixels, angle in [-pi/2, pi/2)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_half_pi(self.theta))


def field_deviation(estimate: OrientationField, truth: OrientationField) -> float:
    """Mean undirected angular difference in degrees over shared foreground cells."""
    if estimate.grid != truth.grid:
        raise GridMismatchError(
            f"grids differ: {estimate.grid} vs {truth.grid}"
        )
    shared = estimate.mask & truth.mask
    if not shared.any():
        raise EmptyMaskError("no cell is foreground in both fields")
    diff = wrap_half_pi_array(estimate.angles[shared] - truth.angles[shared])
    return float(np.mean(np.abs(diff))) * 180.0 / math.pi
