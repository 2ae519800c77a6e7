"""Pure-numpy kernels for model evaluation over many points.

This is the fallback backend; `xqdof.kernels._fast` (Cython) implements the
same functions with identical semantics.  All arrays are 1-D float64 unless
noted; cores/deltas are complex128 model coordinates (imaginary part already
stretched), anchors an (n, 5) float64 array of rows (a, b, theta, s1, s2).
"""

from __future__ import annotations

import numpy as np

EPS_POLE = 1e-6  # model units; query points this close to a pole are nudged

WEIGHT_GAUSSIAN = 0
WEIGHT_TENT = 1


def _wrap(a: np.ndarray) -> np.ndarray:
    w = a - np.pi * np.floor(a / np.pi + 0.5)
    return np.where(w >= np.pi / 2, w - np.pi, w)


def qd_polynomial_values(z: np.ndarray, R: float, cores: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Rational polynomial of the orientation model at stretched model coords z.

    Returns 1 on the closed lower half-plane.  Points within EPS_POLE of a
    pole are deterministically perturbed so evaluation is total.
    """
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    up = z.imag > 0.0
    if not up.any():
        return out
    zu = z[up]
    for d in deltas:
        near = np.abs(zu - d) < EPS_POLE
        if near.any():
            zu = np.where(near, zu + (EPS_POLE + 1j * EPS_POLE), zu)
    val = (zu * zu - R * R) ** 2
    for g in cores:
        val = val * ((zu - g) * (zu - np.conj(g)))
    for d in deltas:
        val = val / ((zu - d) * (zu - np.conj(d)))
    out[up] = val
    return out


def qd_orientations(
    xs: np.ndarray,
    ys: np.ndarray,
    R: float,
    lam: float,
    rotation: float,
    tx: float,
    ty: float,
    cores: np.ndarray,
    deltas: np.ndarray,
) -> np.ndarray:
    """Model orientations at world points, wrapped to [-pi/2, pi/2)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    dx = xs - tx
    dy = ys - ty
    c = np.cos(rotation)
    s = np.sin(rotation)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    z = u + 1j * (lam * v)
    p = qd_polynomial_values(z, R, cores, deltas)
    return _wrap(0.5 * np.angle(p) + rotation)


def anchor_weight_values(
    xs: np.ndarray,
    ys: np.ndarray,
    a: float,
    b: float,
    theta: float,
    s1: float,
    s2: float,
    weight_kind: int,
    tent_radius: float,
) -> np.ndarray:
    """Spatial influence of one anchor at the given points, in [0, 1]."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if weight_kind == WEIGHT_TENT:
        d = np.hypot(xs - a, ys - b)
        return np.maximum(0.0, 1.0 - d / tent_radius)
    ct = np.cos(theta)
    st = np.sin(theta)
    du = ct * (xs - a) + st * (ys - b)
    dv = -st * (xs - a) + ct * (ys - b)
    return np.exp(-0.5 * ((du / s1) ** 2 + (dv / s2) ** 2))


def xqd_orientations(
    xs: np.ndarray,
    ys: np.ndarray,
    R: float,
    lam: float,
    rotation: float,
    tx: float,
    ty: float,
    cores: np.ndarray,
    deltas: np.ndarray,
    anchors: np.ndarray,
    weight_kind: int,
    tent_radius: float,
) -> np.ndarray:
    """Anchor-corrected orientations at world points, wrapped to [-pi/2, pi/2)."""
    base = qd_orientations(xs, ys, R, lam, rotation, tx, ty, cores, deltas)
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 5)
    n = anchors.shape[0]
    if n == 0:
        return base
    # Each anchor's correction is measured against the uncorrected model at
    # its own position, then composed in anchor order.
    base_at_anchor = qd_orientations(
        anchors[:, 0], anchors[:, 1], R, lam, rotation, tx, ty, cores, deltas
    )
    shift = _wrap(anchors[:, 2] - base_at_anchor)
    corr = np.zeros_like(base)
    for i in range(n):
        w = anchor_weight_values(
            xs, ys,
            anchors[i, 0], anchors[i, 1], anchors[i, 2],
            anchors[i, 3], anchors[i, 4],
            weight_kind, tent_radius,
        )
        corr = _wrap(corr + w * shift[i])
    return _wrap(base + corr)


def objective_sum(angles: np.ndarray, thetas: np.ndarray) -> float:
    """Sum over marks of the squared doubled-circle chord 4*sin^2(A - theta).

    sin^2 is pi-periodic, so no wrapping of the difference is needed.
    """
    d = np.asarray(angles, dtype=float) - np.asarray(thetas, dtype=float)
    s = np.sin(d)
    return float(np.sum(4.0 * s * s))
