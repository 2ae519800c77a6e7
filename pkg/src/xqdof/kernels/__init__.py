"""Backend selection for the hot evaluation kernels.

The compiled Cython extension (`xqdof.kernels._fast`) is used when it has
been built; otherwise the vectorized numpy reference implementation takes
over.  Set XQDOF_KERNEL=reference or XQDOF_KERNEL=compiled to force one.
"""

from __future__ import annotations

import os

from . import _reference

WEIGHT_GAUSSIAN = _reference.WEIGHT_GAUSSIAN
WEIGHT_TENT = _reference.WEIGHT_TENT
EPS_POLE = _reference.EPS_POLE

_requested = os.environ.get("XQDOF_KERNEL", "auto").lower()
if _requested not in ("auto", "compiled", "reference"):
    raise ValueError(f"XQDOF_KERNEL must be auto, compiled or reference, not {_requested!r}")

if _requested in ("auto", "compiled"):
    try:
        from . import _fast  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "XQDOF_KERNEL=compiled but the extension is not built; "
                "run `python3 setup.py build_ext --inplace`"
            )
        _fast = None
else:
    _fast = None

if _fast is not None:
    BACKEND = "compiled"
    _impl = _fast
else:
    BACKEND = "reference"
    _impl = _reference

qd_polynomial_values = _impl.qd_polynomial_values
qd_orientations = _impl.qd_orientations
anchor_weight_values = _impl.anchor_weight_values
xqd_orientations = _impl.xqd_orientations
objective_sum = _impl.objective_sum


def backends() -> dict[str, object]:
    """Importable backend modules keyed by name (for tests and benchmarks)."""
    out: dict[str, object] = {"reference": _reference}
    if _fast is not None:
        out["compiled"] = _fast
    return out
