"""Orientation-field modeling, fitting and compression toolkit."""

from .anchors import (
    GAUSSIAN,
    AnchorPoint,
    WeightKind,
    XqdModel,
    anchor_weight,
    correction_multi,
    correction_single,
    evaluate_xqd_field,
    tent_weight,
    xqd_orientation,
)
from .field import (
    GridSpec,
    Mark,
    OrientationField,
    angular_deviation,
    field_deviation,
    wrap_half_pi,
)
from .qd import QdParams, evaluate_qd_field, qd_orientation, qd_params_from_world, qd_polynomial

__version__ = "0.1.0"

__all__ = [
    "AnchorPoint",
    "GAUSSIAN",
    "GridSpec",
    "Mark",
    "OrientationField",
    "QdParams",
    "WeightKind",
    "XqdModel",
    "angular_deviation",
    "anchor_weight",
    "correction_multi",
    "correction_single",
    "evaluate_qd_field",
    "evaluate_xqd_field",
    "field_deviation",
    "qd_orientation",
    "qd_params_from_world",
    "qd_polynomial",
    "tent_weight",
    "wrap_half_pi",
    "xqd_orientation",
]
