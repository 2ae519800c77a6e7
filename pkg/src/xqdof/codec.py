"""Binary .xqd container: 17-byte header + float32 parameter payload.

Layout (all little-endian):

    offset  size  field
    0       4     magic "XQD1"
    4       1     version (1)
    5       1     core count
    6       1     delta count
    7       2     anchor count (u16)
    9       2     image width in px (u16)
    11      2     image height in px (u16)
    13      1     grid spacing in px (u8)
    14      1     weight kind (0 gaussian, 1 tent)
    15      2     tent radius, fixed-point 1/64 px (0 for gaussian)
    17      -     float32 payload: lambda, R, rotation, tx, ty,
                  cores (re, im)..., deltas (re, im)...,
                  anchors (a, b, theta, sigma1, sigma2)...

Total size is 17 + 4 * (5 + 2*(cores+deltas) + 5*anchors) bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from .anchors import MAX_ANCHORS_ENCODABLE, AnchorPoint, WeightKind, XqdModel
from .errors import BadMagicError, BadVersionError, CapacityError, LengthMismatchError
from .qd import QdParams

MAGIC = b"XQD1"
VERSION = 1
HEADER_SIZE = 17
TENT_RADIUS_UNIT = 1.0 / 64.0  # px per fixed-point step in the header field

_HEADER = struct.Struct("<4sBBBHHHBBH")

_HALF_PI = float(np.pi / 2)


def _quantize_theta(theta: float) -> float:
    """Round theta to f32 without leaving [-pi/2, pi/2).

    Values at the very edge of the range can cross it when rounded to f32,
    which would re-wrap by pi on decode; nudge them back by one f32 step.
    """
    q = np.float32(theta)
    while float(q) >= _HALF_PI:
        q = np.nextafter(q, np.float32(0.0))
    while float(q) < -_HALF_PI:
        q = np.nextafter(q, np.float32(0.0))
    return float(q)


def parameter_count(model: XqdModel) -> int:
    """Real parameters consumed: 5 global + 2 per singular point + 5 per anchor."""
    s = len(model.qd.cores) + len(model.qd.deltas)
    return 5 + 2 * s + 5 * len(model.anchors)


def encoded_size(model: XqdModel) -> int:
    return HEADER_SIZE + 4 * parameter_count(model)


def encode(model: XqdModel) -> bytes:
    """Serialize a model; raises CapacityError when counts overflow the header."""
    qd = model.qd
    n_anchors = len(model.anchors)
    if n_anchors > MAX_ANCHORS_ENCODABLE:
        raise CapacityError(f"{n_anchors} anchors exceed the u16 anchor-count field")
    for name, value, limit in (
        ("image width", model.image_width_px, 0xFFFF),
        ("image height", model.image_height_px, 0xFFFF),
        ("grid spacing", model.grid_spacing_px, 0xFF),
    ):
        if not (0 <= value <= limit):
            raise CapacityError(f"{name} {value} does not fit the header field")
    if model.weight.kind == "tent":
        weight_code = 1
        radius_q = round(model.weight.tent_radius / TENT_RADIUS_UNIT)
        if not (1 <= radius_q <= 0xFFFF):
            raise CapacityError(
                f"tent radius {model.weight.tent_radius} px not representable "
                f"in 1/64 px units"
            )
    else:
        weight_code = 0
        radius_q = 0

    header = _HEADER.pack(
        MAGIC, VERSION,
        len(qd.cores), len(qd.deltas), n_anchors,
        model.image_width_px, model.image_height_px, model.grid_spacing_px,
        weight_code, radius_q,
    )
    values = [qd.lam, qd.R, qd.rotation, qd.translation[0], qd.translation[1]]
    for c in qd.cores:
        values += [c.real, c.imag]
    for d in qd.deltas:
        values += [d.real, d.imag]
    for p in model.anchors:
        values += [p.a, p.b, _quantize_theta(p.theta), p.sigma1, p.sigma2]
    payload = np.asarray(values, dtype="<f4").tobytes()
    return header + payload


def decode(data: bytes) -> XqdModel:
    """Parse .xqd bytes; encode(decode(b)) reproduces b for canonical input."""
    if len(data) < HEADER_SIZE:
        raise LengthMismatchError(f"buffer of {len(data)} bytes is shorter than the header")
    (magic, version, n_cores, n_deltas, n_anchors,
     width, height, spacing, weight_code, radius_q) = _HEADER.unpack(data[:HEADER_SIZE])
    if magic != MAGIC:
        raise BadMagicError(f"expected {MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}")
    n_params = 5 + 2 * (n_cores + n_deltas) + 5 * n_anchors
    expected = HEADER_SIZE + 4 * n_params
    if len(data) != expected:
        raise LengthMismatchError(
            f"header promises {expected} bytes, buffer has {len(data)}"
        )
    if weight_code not in (0, 1):
        raise BadVersionError(f"unknown weight kind byte {weight_code}")

    vals = np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE).astype(float)
    lam, R, rotation, tx, ty = vals[:5]
    pos = 5
    cores = []
    for _ in range(n_cores):
        cores.append(complex(vals[pos], vals[pos + 1]))
        pos += 2
    deltas = []
    for _ in range(n_deltas):
        deltas.append(complex(vals[pos], vals[pos + 1]))
        pos += 2
    anchors = []
    for _ in range(n_anchors):
        a, b, theta, s1, s2 = vals[pos:pos + 5]
        anchors.append(AnchorPoint(a=a, b=b, theta=theta, sigma1=s1, sigma2=s2))
        pos += 5
    qd = QdParams(
        R=float(R), lam=float(lam), rotation=float(rotation),
        translation=(float(tx), float(ty)),
        cores=tuple(cores), deltas=tuple(deltas),
    )
    if weight_code == 1:
        weight = WeightKind("tent", tent_radius=radius_q * TENT_RADIUS_UNIT)
    else:
        weight = WeightKind("gaussian")
    return XqdModel(
        qd=qd, anchors=tuple(anchors), weight=weight,
        image_width_px=width, image_height_px=height, grid_spacing_px=spacing,
    )


def compression_stats(model: XqdModel | int, raster_bytes: int) -> tuple[int, float]:
    """Encoded size in bytes and the raster/encoded compression factor.

    The first argument is a model, or directly an encoded size in bytes when
    comparing against a known file size.
    """
    if raster_bytes <= 0:
        raise ValueError(f"raster_bytes must be positive, got {raster_bytes}")
    size = model if isinstance(model, int) else encoded_size(model)
    if size <= 0:
        raise ValueError(f"encoded size must be positive, got {size}")
    return size, raster_bytes / size
