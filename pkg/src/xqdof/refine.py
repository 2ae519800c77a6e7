"""Iterative local blending that drives a modeled ratio field to the truth.

The complex ratio field f(z) = exp(2i*(A_true - A_model)) is unit-modulus and
Lipschitz away from the singular points.  One step blends the true value at a
point p into the current approximation under a tent weight of radius r; a
sweep over a covering set of points contracts the sup error, and scheduling
r = eps/L yields a strictly decreasing error sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .field import GridSpec, OrientationField
from .qd import QdParams, qd_orientations_at

LIPSCHITZ_FLOOR = 1e-6
LIPSCHITZ_SAFETY = 1.5
SINGULAR_EXCLUDE_PX = 2.0
DEGENERATE_MODULUS = 1e-12
COVER_FRACTION = 0.13  # covering-ball radius as a fraction of the blend radius


@dataclass
class RatioField:
    """Unit-modulus complex values on a grid plus the estimated Lipschitz bound."""

    grid: GridSpec
    values: np.ndarray  # complex (rows, cols)
    mask: np.ndarray  # bool (rows, cols)
    lipschitz: float = LIPSCHITZ_FLOOR
    degenerate_cells: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.mask = np.asarray(self.mask, dtype=bool)
        shape = (self.grid.rows, self.grid.cols)
        if self.values.shape != shape or self.mask.shape != shape:
            raise ValueError(f"values/mask shape does not match grid {shape}")

    def copy(self) -> "RatioField":
        return RatioField(grid=self.grid, values=self.values.copy(),
                          mask=self.mask.copy(), lipschitz=self.lipschitz,
                          degenerate_cells=self.degenerate_cells)

    def sup_distance(self, other: "RatioField") -> float:
        shared = self.mask & other.mask
        if not shared.any():
            return 0.0
        return float(np.abs(self.values[shared] - other.values[shared]).max())


@dataclass
class RefineTrace:
    """Per-sweep record: sup error, points placed, blend radius used."""

    epsilons: list[float] = field(default_factory=list)  # [eps_0, eps_1, ...]
    anchors: list[int] = field(default_factory=list)  # points per sweep
    radii: list[float] = field(default_factory=list)  # blend radius per sweep
    degenerate_cells: int = 0

    def to_csv(self) -> str:
        lines = ["iteration,epsilon,anchors,radius"]
        for i, eps in enumerate(self.epsilons):
            anchors = self.anchors[i - 1] if i >= 1 else 0
            radius = self.radii[i - 1] if i >= 1 else 0.0
            lines.append(f"{i},{eps:.12g},{anchors},{radius:.12g}")
        return "\n".join(lines) + "\n"


def ratio_field(truth: OrientationField, qd: QdParams) -> RatioField:
    """Doubled-angle ratio of the true field to the model, on the truth grid."""
    xs, ys = truth.grid.xy_arrays()
    model_angles = np.zeros_like(truth.angles)
    if truth.mask.any():
        model_angles[truth.mask] = qd_orientations_at(xs[truth.mask], ys[truth.mask], qd)
    values = np.exp(2j * (truth.angles - model_angles))
    values[~truth.mask] = 1.0
    f = RatioField(grid=truth.grid, values=values, mask=truth.mask.copy())
    exclude = qd.core_world_positions() + qd.delta_world_positions()
    f.lipschitz = estimate_lipschitz(f, exclude=exclude)
    return f


def tent(z: complex, p: complex, r: float) -> float:
    """Tent weight (1 - |z-p|/r) clamped at zero."""
    if r <= 0:
        raise ValueError(f"tent radius must be > 0, got {r}")
    return max(0.0, 1.0 - abs(z - p) / r)


def estimate_lipschitz(f: RatioField, exclude=(),
                       exclude_radius: float = SINGULAR_EXCLUDE_PX) -> float:
    """Largest 4-neighbor difference quotient over foreground, with margin.

    Cells within exclude_radius of an excluded point (singular points, where
    the quotient is unbounded) are skipped.  Returns at least the floor value.
    """
    grid = f.grid
    usable = f.mask.copy()
    if len(exclude):
        xs, ys = grid.xy_arrays()
        for (px, py) in exclude:
            usable &= np.hypot(xs - px, ys - py) > exclude_radius
    best = 0.0
    vals = f.values
    h = grid.spacing_px
    right = usable[:, :-1] & usable[:, 1:]
    if right.any():
        best = max(best, float(np.abs(vals[:, :-1] - vals[:, 1:])[right].max()) / h)
    down = usable[:-1, :] & usable[1:, :]
    if down.any():
        best = max(best, float(np.abs(vals[:-1, :] - vals[1:, :])[down].max()) / h)
    return max(LIPSCHITZ_FLOOR, LIPSCHITZ_SAFETY * best)


def sample_ratio(f: RatioField, x: float, y: float) -> complex:
    """Field value at an arbitrary point: bilinear over the complex values,
    projected back to the unit circle; exact at grid nodes."""
    grid = f.grid
    ox, oy = grid.origin_px
    cx = (x - ox) / grid.spacing_px
    cy = (y - oy) / grid.spacing_px
    c0 = int(np.clip(math.floor(cx), 0, grid.cols - 1))
    r0 = int(np.clip(math.floor(cy), 0, grid.rows - 1))
    c1 = min(c0 + 1, grid.cols - 1)
    r1 = min(r0 + 1, grid.rows - 1)
    tx = float(np.clip(cx - c0, 0.0, 1.0))
    ty = float(np.clip(cy - r0, 0.0, 1.0))
    v = ((1 - tx) * (1 - ty) * f.values[r0, c0]
         + tx * (1 - ty) * f.values[r0, c1]
         + (1 - tx) * ty * f.values[r1, c0]
         + tx * ty * f.values[r1, c1])
    mag = abs(v)
    if mag < DEGENERATE_MODULUS:
        return f.values[r0, c0]
    return v / mag


def _apply_step(values: np.ndarray, mask: np.ndarray, grid: GridSpec,
                px: float, py: float, r: float, f_at_p: complex) -> int:
    """Blend f_at_p into `values` under a tent of radius r centered at (px, py),
    in place; returns the count of degenerate (kept) midpoints."""
    ox, oy = grid.origin_px
    h = grid.spacing_px
    c_lo = max(0, int(math.ceil((px - r - ox) / h)))
    c_hi = min(grid.cols - 1, int(math.floor((px + r - ox) / h)))
    r_lo = max(0, int(math.ceil((py - r - oy) / h)))
    r_hi = min(grid.rows - 1, int(math.floor((py + r - oy) / h)))
    if c_lo > c_hi or r_lo > r_hi:
        return 0
    xs = ox + np.arange(c_lo, c_hi + 1) * h
    ys = oy + np.arange(r_lo, r_hi + 1) * h
    gx, gy = np.meshgrid(xs, ys)
    w = 1.0 - np.hypot(gx - px, gy - py) / r
    block = (slice(r_lo, r_hi + 1), slice(c_lo, c_hi + 1))
    inside = (w > 0.0) & mask[block]
    if not inside.any():
        return 0
    sub = values[block]
    blended = w * f_at_p + (1.0 - w) * sub
    mag = np.abs(blended)
    degenerate = inside & (mag < DEGENERATE_MODULUS)
    ok = inside & ~degenerate
    sub[ok] = blended[ok] / mag[ok]
    return int(degenerate.sum())


def refine_step(f_n: RatioField, f_true: RatioField, p: tuple[float, float],
                r: float) -> RatioField:
    """One blending step toward the true field at point p with radius r.

    Cells at distance >= r are returned bit-identically; blended cells are
    re-normalized to unit modulus, and an exactly-cancelling midpoint keeps
    its previous value (counted in degenerate_cells).
    """
    if r <= 0:
        raise ValueError(f"blend radius must be > 0, got {r}")
    if f_n.grid != f_true.grid:
        raise ValueError("ratio fields must share a grid")
    out = f_n.copy()
    f_at_p = sample_ratio(f_true, p[0], p[1])
    out.degenerate_cells += _apply_step(out.values, out.mask, out.grid,
                                        p[0], p[1], r, f_at_p)
    return out


def cover_points(grid: GridSpec, mask: np.ndarray, radius: float) -> list[tuple[float, float]]:
    """Points whose radius-balls cover every foreground cell center.

    Candidates come from a hexagonal lattice with spacing radius*sqrt(3)
    (covering radius exactly `radius`), restricted to the radius-dilated
    mask; a greedy sweep drops candidates that cover no new cell, so a
    single-cell mask yields exactly one point.
    """
    if radius <= 0:
        raise ValueError(f"cover radius must be > 0, got {radius}")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return []
    xs, ys = grid.xy_arrays()
    fx = xs[mask]
    fy = ys[mask]
    x_min, x_max = fx.min() - radius, fx.max() + radius
    y_min, y_max = fy.min() - radius, fy.max() + radius

    spacing = radius * math.sqrt(3.0)
    row_height = 1.5 * radius
    covered = np.zeros(fx.shape[0], dtype=bool)
    points: list[tuple[float, float]] = []
    n_rows = int(math.floor((y_max - y_min) / row_height)) + 1
    n_cols = int(math.floor((x_max - x_min) / spacing)) + 2
    for j in range(n_rows):
        py = y_min + j * row_height
        x_offset = 0.5 * spacing if j % 2 else 0.0
        for i in range(n_cols):
            px = x_min + x_offset + i * spacing
            d2 = (fx - px) ** 2 + (fy - py) ** 2
            within = d2 <= radius * radius
            if not within.any():
                continue  # outside the dilated mask
            if (within & ~covered).any():
                points.append((px, py))
                covered |= within
    # the lattice covers the plane, so every cell met some candidate
    assert covered.all()
    return points


def refine_until(f0: RatioField, f_true: RatioField, eps_target: float,
                 max_outer: int = 50) -> tuple[RatioField, RefineTrace]:
    """Sweep blending steps over coverings until the sup error reaches target.

    Each sweep uses blend radius r = eps/L and covering balls of radius
    0.13*r; the sup error strictly decreases until eps_target or max_outer.
    A (near-)constant ratio field degenerates to one global copy step.
    """
    if eps_target <= 0:
        raise ValueError(f"eps_target must be > 0, got {eps_target}")
    current = f0.copy()
    trace = RefineTrace()
    eps = current.sup_distance(f_true)
    trace.epsilons.append(eps)
    if eps <= eps_target:
        return current, trace
    L = f_true.lipschitz
    if L <= LIPSCHITZ_FLOOR:
        # effectively constant truth: a single global blend converges at once
        current.values[current.mask] = f_true.values[current.mask]
        trace.epsilons.append(current.sup_distance(f_true))
        trace.anchors.append(1)
        trace.radii.append(math.inf)
        return current, trace

    for _ in range(max_outer):
        r = eps / L
        pts = cover_points(current.grid, current.mask & f_true.mask,
                           COVER_FRACTION * r)
        for (px, py) in pts:
            f_at_p = sample_ratio(f_true, px, py)
            current.degenerate_cells += _apply_step(
                current.values, current.mask, current.grid, px, py, r, f_at_p)
        eps = current.sup_distance(f_true)
        trace.epsilons.append(eps)
        trace.anchors.append(len(pts))
        trace.radii.append(r)
        if eps <= eps_target:
            break
    trace.degenerate_cells = current.degenerate_cells
    return current, trace
