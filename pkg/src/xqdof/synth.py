"""Random but plausible ground-truth models for benchmarks and tests.

Geometry convention: the model axis runs near the bottom of the grid, cores
sit in the upper middle, deltas in the lower middle third.  All draws come
from a seeded generator, so a (preset, anchors, seed, grid) tuple always
produces the same model.
"""

from __future__ import annotations

import numpy as np

from .anchors import GAUSSIAN, AnchorPoint, WeightKind, XqdModel, evaluate_xqd_field
from .field import GridSpec, OrientationField, wrap_half_pi
from .qd import qd_orientation, qd_params_from_world

PRESETS = ("arch", "loop", "doubleloop")


def synth_model(
    preset: str,
    n_anchors: int,
    seed: int,
    grid: GridSpec,
    weight: WeightKind = GAUSSIAN,
    max_correction_rad: float = 0.5,
) -> XqdModel:
    """Draw a random valid model of the given class on the grid's extent."""
    if preset not in PRESETS:
        raise ValueError(f"preset must be one of {PRESETS}, got {preset!r}")
    rng = np.random.default_rng(seed)
    ox, oy = grid.origin_px
    width = grid.cols * grid.spacing_px
    height = grid.rows * grid.spacing_px
    cx = ox + (grid.cols - 1) * grid.spacing_px / 2.0

    rotation = rng.uniform(-0.12, 0.12)
    lam = rng.uniform(0.85, 1.25)
    R = rng.uniform(0.35, 0.5) * width
    tx = cx + rng.uniform(-0.05, 0.05) * width
    ty = oy + rng.uniform(0.02, 0.12) * height

    cores: list[tuple[float, float]] = []
    deltas: list[tuple[float, float]] = []
    if preset == "loop":
        cores.append((cx + rng.uniform(-0.12, 0.12) * width,
                      ty + rng.uniform(0.45, 0.65) * height))
        side = rng.choice([-1.0, 1.0])
        deltas.append((cx + side * rng.uniform(0.1, 0.25) * width,
                       ty + rng.uniform(0.15, 0.3) * height))
    elif preset == "doubleloop":
        gap = rng.uniform(0.04, 0.1) * width
        cy = ty + rng.uniform(0.5, 0.65) * height
        cores.append((cx - gap, cy + rng.uniform(-0.03, 0.03) * height))
        cores.append((cx + gap, cy + rng.uniform(-0.03, 0.03) * height))
        for side in (-1.0, 1.0):
            deltas.append((cx + side * rng.uniform(0.2, 0.3) * width,
                           ty + rng.uniform(0.12, 0.25) * height))

    qd = qd_params_from_world(
        R=R, lam=lam, rotation=rotation, translation=(tx, ty),
        world_cores=cores, world_deltas=deltas,
    )

    anchors = []
    inset = grid.spacing_px
    for _ in range(n_anchors):
        a = rng.uniform(ox + inset, ox + (grid.cols - 1) * grid.spacing_px - inset)
        b = rng.uniform(oy + inset, oy + (grid.rows - 1) * grid.spacing_px - inset)
        theta = wrap_half_pi(
            qd_orientation(a, b, qd) + rng.uniform(-max_correction_rad, max_correction_rad)
        )
        anchors.append(AnchorPoint(
            a=a, b=b, theta=theta,
            sigma1=rng.uniform(2.0, 5.0) * grid.spacing_px,
            sigma2=rng.uniform(2.0, 5.0) * grid.spacing_px,
        ))

    return XqdModel(
        qd=qd, anchors=tuple(anchors), weight=weight,
        image_width_px=int(round(width)), image_height_px=int(round(height)),
        grid_spacing_px=int(round(grid.spacing_px)),
    )


def synth_truth(model: XqdModel, grid: GridSpec) -> OrientationField:
    """Exact field of the model on the grid with a full foreground mask."""
    return evaluate_xqd_field(model, grid)


def parse_grid(spec: str) -> GridSpec:
    """Parse a compact grid description like '40x40@12'."""
    try:
        dims, spacing_s = spec.split("@")
        cols_s, rows_s = dims.lower().split("x")
        cols, rows, spacing = int(cols_s), int(rows_s), float(spacing_s)
    except ValueError:
        raise ValueError(f"grid must look like '40x40@12', got {spec!r}") from None
    return GridSpec(cols=cols, rows=rows, spacing_px=spacing,
                    origin_px=(spacing / 2.0, spacing / 2.0))
