"""Local anchor-point corrections layered on the global model.

An anchor pins the orientation at one position and blends the implied
correction into the surroundings through a weight that is 1 at the anchor
and decays with distance: an anisotropic Gaussian in the anchor's own
rotated frame, or a compactly supported tent.  Multiple anchors compose in
order, each correction measured against the uncorrected global model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .field import GridSpec, OrientationField, wrap_half_pi
from .qd import QdParams, qd_orientation

MAX_ANCHORS_ENCODABLE = 65535


@dataclass(frozen=True)
class AnchorPoint:
    """Position (a, b) in pixels, target orientation theta, spatial extents."""

    a: float
    b: float
    theta: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError(f"anchor sigmas must be > 0, got {self.sigma1}, {self.sigma2}")
        object.__setattr__(self, "theta", wrap_half_pi(self.theta))


@dataclass(frozen=True)
class WeightKind:
    """Weight family: smooth Gaussian (default) or tent with a finite radius."""

    kind: str = "gaussian"
    tent_radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "tent"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "tent" and not (self.tent_radius > 0):
            raise ValueError("tent weight needs a radius > 0")

    @property
    def code(self) -> int:
        return kernels.WEIGHT_TENT if self.kind == "tent" else kernels.WEIGHT_GAUSSIAN


GAUSSIAN = WeightKind("gaussian")


def tent_weight(radius: float) -> WeightKind:
    return WeightKind("tent", tent_radius=radius)


@dataclass(frozen=True)
class XqdModel:
    """Global model plus an ordered anchor list; the compressed representation.

    image_width_px/image_height_px/grid_spacing_px are carried for the binary
    container header and do not affect evaluation.
    """

    qd: QdParams
    anchors: tuple[AnchorPoint, ...] = ()
    weight: WeightKind = GAUSSIAN
    image_width_px: int = 0
    image_height_px: int = 0
    grid_spacing_px: int = 0

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))

    def anchor_array(self) -> np.ndarray:
        if not self.anchors:
            return np.zeros((0, 5), dtype=float)
        return np.asarray(
            [(p.a, p.b, p.theta, p.sigma1, p.sigma2) for p in self.anchors], dtype=float
        )

    def with_anchors(self, anchors) -> "XqdModel":
        return replace(self, anchors=tuple(anchors))


def anchor_weight(x: float, y: float, p: AnchorPoint, kind: WeightKind = GAUSSIAN) -> float:
    """Influence of anchor p at (x, y), in [0, 1]; exactly 1 at the anchor."""
    out = kernels.anchor_weight_values(
        np.asarray([x], dtype=float), np.asarray([y], dtype=float),
        p.a, p.b, p.theta, p.sigma1, p.sigma2, kind.code, kind.tent_radius,
    )
    return float(out[0])


def correction_single(
    x: float, y: float, p: AnchorPoint, qd: QdParams, kind: WeightKind = GAUSSIAN
) -> float:
    """Weighted orientation shift contributed by one anchor at (x, y)."""
    shift = wrap_half_pi(p.theta - qd_orientation(p.a, p.b, qd))
    return anchor_weight(x, y, p, kind) * shift


def correction_multi(
    x: float, y: float, anchors, qd: QdParams, kind: WeightKind = GAUSSIAN
) -> float:
    """Ordered composition of single-anchor corrections, wrapped each step."""
    anchors = tuple(anchors)
    if not anchors:
        raise ValueError("correction_multi requires at least one anchor")
    total = correction_single(x, y, anchors[0], qd, kind)
    for p in anchors[1:]:
        total = wrap_half_pi(total + correction_single(x, y, p, qd, kind))
    return total


def xqd_orientation(x: float, y: float, model: XqdModel) -> float:
    """Corrected orientation at a world point, wrapped to [-pi/2, pi/2)."""
    return float(xqd_orientations_at(np.asarray([x]), np.asarray([y]), model)[0])


def xqd_orientations_at(xs: np.ndarray, ys: np.ndarray, model: XqdModel) -> np.ndarray:
    """Vectorized xqd_orientation over arrays of world coordinates."""
    qd = model.qd
    tx, ty = qd.translation
    xs = np.asarray(xs, dtype=float)
    shape = xs.shape
    out = kernels.xqd_orientations(
        xs.ravel(), np.asarray(ys, dtype=float).ravel(),
        qd.R, qd.lam, qd.rotation, tx, ty,
        qd._core_array(), qd._delta_array(),
        model.anchor_array(), model.weight.code, model.weight.tent_radius,
    )
    return out.reshape(shape)


def evaluate_xqd_field(
    model: XqdModel, grid: GridSpec, mask: np.ndarray | None = None
) -> OrientationField:
    """Sample the corrected model at every cell center."""
    if mask is None:
        mask = np.ones((grid.rows, grid.cols), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    xs, ys = grid.xy_arrays()
    angles = np.zeros((grid.rows, grid.cols), dtype=float)
    if mask.any():
        angles[mask] = xqd_orientations_at(xs[mask], ys[mask], model)
    return OrientationField(grid=grid, angles=angles, mask=mask)
