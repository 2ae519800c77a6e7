"""Global orientation model from a rational complex polynomial.

Orientations are half the argument of P(z) evaluated in a rigid model frame:
the arch factor (z^2 - R^2)^2 is multiplied by one conjugate-pair factor per
core and divided by one per delta.  Below the model frame's horizontal axis
P is 1, so orientations there equal the frame rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .field import GridSpec, OrientationField

MAX_SINGULAR_PAIRS = 2  # a fingerprint carries at most two cores and two deltas


@dataclass(frozen=True)
class QdParams:
    """Global model parameters.

    cores/deltas are complex coordinates in the stretched model frame and
    must lie strictly in the upper half-plane.  `translation` is the world
    position of the model origin and `rotation` the world->model frame angle.
    """

    R: float
    lam: float
    rotation: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)
    cores: tuple[complex, ...] = ()
    deltas: tuple[complex, ...] = ()

    def __post_init__(self):
        if not (self.R > 0):
            raise ValueError(f"R must be > 0, got {self.R}")
        if not (self.lam > 0):
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        object.__setattr__(self, "cores", tuple(complex(c) for c in self.cores))
        object.__setattr__(self, "deltas", tuple(complex(d) for d in self.deltas))
        for name, pts in (("core", self.cores), ("delta", self.deltas)):
            if len(pts) > MAX_SINGULAR_PAIRS:
                raise ValueError(f"at most {MAX_SINGULAR_PAIRS} {name}s allowed, got {len(pts)}")
            for p in pts:
                if not (p.imag > 0):
                    raise ValueError(f"{name} {p} must lie strictly in the upper half-plane")

    # -- frame helpers -------------------------------------------------

    def world_to_model(self, x: float, y: float) -> tuple[float, float]:
        """World pixels -> unstretched model coordinates (u, v)."""
        tx, ty = self.translation
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        dx, dy = x - tx, y - ty
        return (c * dx + s * dy, -s * dx + c * dy)

    def model_to_world(self, u: float, v: float) -> tuple[float, float]:
        tx, ty = self.translation
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return (tx + c * u - s * v, ty + s * u + c * v)

    def singular_point_world(self, p: complex) -> tuple[float, float]:
        """World position of a core/delta given as a stretched model coordinate."""
        return self.model_to_world(p.real, p.imag / self.lam)

    def core_world_positions(self) -> list[tuple[float, float]]:
        return [self.singular_point_world(c) for c in self.cores]

    def delta_world_positions(self) -> list[tuple[float, float]]:
        return [self.singular_point_world(d) for d in self.deltas]

    def _core_array(self) -> np.ndarray:
        return np.asarray(self.cores, dtype=complex)

    def _delta_array(self) -> np.ndarray:
        return np.asarray(self.deltas, dtype=complex)


def qd_params_from_world(
    R: float,
    lam: float,
    rotation: float,
    translation: tuple[float, float],
    world_cores: list[tuple[float, float]] = (),
    world_deltas: list[tuple[float, float]] = (),
) -> QdParams:
    """Build QdParams with cores/deltas given as world-pixel positions.

    Each world point is mapped into the model frame and stretched; it must
    land strictly above the model axis.
    """
    probe = QdParams(R=R, lam=lam, rotation=rotation, translation=translation)

    def to_model(pt: tuple[float, float]) -> complex:
        u, v = probe.world_to_model(pt[0], pt[1])
        return complex(u, lam * v)

    return QdParams(
        R=R,
        lam=lam,
        rotation=rotation,
        translation=translation,
        cores=tuple(to_model(p) for p in world_cores),
        deltas=tuple(to_model(p) for p in world_deltas),
    )


def qd_polynomial(z: complex, params: QdParams) -> complex:
    """Evaluate the rational polynomial at a stretched model coordinate."""
    out = kernels.qd_polynomial_values(
        np.asarray([z], dtype=complex), params.R, params._core_array(), params._delta_array()
    )
    return complex(out[0])


def qd_orientation(x: float, y: float, params: QdParams) -> float:
    """Model orientation at a world point, wrapped to [-pi/2, pi/2)."""
    tx, ty = params.translation
    out = kernels.qd_orientations(
        np.asarray([x], dtype=float),
        np.asarray([y], dtype=float),
        params.R, params.lam, params.rotation, tx, ty,
        params._core_array(), params._delta_array(),
    )
    return float(out[0])


def qd_orientations_at(xs: np.ndarray, ys: np.ndarray, params: QdParams) -> np.ndarray:
    """Vectorized qd_orientation over arrays of world coordinates."""
    tx, ty = params.translation
    xs = np.asarray(xs, dtype=float)
    shape = xs.shape
    out = kernels.qd_orientations(
        xs.ravel(), np.asarray(ys, dtype=float).ravel(),
        params.R, params.lam, params.rotation, tx, ty,
        params._core_array(), params._delta_array(),
    )
    return out.reshape(shape)


def evaluate_qd_field(
    params: QdParams, grid: GridSpec, mask: np.ndarray | None = None
) -> OrientationField:
    """Sample the model at every cell center; background cells get angle 0."""
    if mask is None:
        mask = np.ones((grid.rows, grid.cols), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    xs, ys = grid.xy_arrays()
    angles = np.zeros((grid.rows, grid.cols), dtype=float)
    if mask.any():
        angles[mask] = qd_orientations_at(xs[mask], ys[mask], params)
    return OrientationField(grid=grid, angles=angles, mask=mask)
