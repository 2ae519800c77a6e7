import math

import numpy as np
import pytest

from xqdof.field import GridSpec, OrientationField
from xqdof.render import field_segments, grid_from_model_header, render_field_svg, render_model_svg
from xqdof.synth import parse_grid, synth_model


def _field(angles, mask=None, spacing=12):
    angles = np.asarray(angles, dtype=float)
    rows, cols = angles.shape
    grid = GridSpec(cols=cols, rows=rows, spacing_px=spacing,
                    origin_px=(spacing / 2, spacing / 2))
    if mask is None:
        mask = np.ones_like(angles, dtype=bool)
    return OrientationField(grid=grid, angles=angles, mask=mask)


def test_single_horizontal_segment():
    f = _field([[0.0]])
    segs = list(field_segments(f))
    assert len(segs) == 1
    x1, y1, x2, y2 = segs[0]
    assert y1 == y2  # horizontal
    assert x2 - x1 == pytest.approx(0.8 * 12)
    svg = render_field_svg(f)
    assert svg.count("<line") == 1
    assert svg.startswith("<svg")


def test_segment_length_and_angle():
    f = _field([[math.pi / 4]])
    (x1, y1, x2, y2) = next(iter(field_segments(f)))
    assert math.hypot(x2 - x1, y2 - y1) == pytest.approx(0.8 * 12)
    assert math.atan2(y2 - y1, x2 - x1) == pytest.approx(math.pi / 4)


def test_stride_counts():
    f = _field(np.zeros((7, 5)))
    assert len(list(field_segments(f, stride=1))) == 35
    # rows 0,2,4,6 and cols 0,2,4 -> 4 * 3
    assert len(list(field_segments(f, stride=2))) == 12
    assert len(list(field_segments(f, stride=3))) == 3 * 2


def test_stride_validation():
    f = _field(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        list(field_segments(f, stride=0))


def test_mask_respected():
    mask = np.array([[True, False], [False, True]])
    f = _field(np.zeros((2, 2)), mask=mask)
    assert len(list(field_segments(f))) == 2


def test_model_render_has_markers():
    grid = parse_grid("8x8@12")
    model = synth_model("loop", 2, 5, grid)
    svg = render_model_svg(model, grid, stride=2)
    assert svg.count("<circle") == 1  # one core
    assert svg.count("<polygon") == 1  # one delta
    assert svg.count("<line") == 16


def test_grid_from_model_header():
    grid = parse_grid("10x8@12")
    model = synth_model("arch", 0, 1, grid)
    back = grid_from_model_header(model)
    assert (back.cols, back.rows, back.spacing_px) == (10, 8, 12)
    bare = synth_model("arch", 0, 1, grid)
    bare = type(bare)(qd=bare.qd)  # no header metadata
    with pytest.raises(ValueError):
        grid_from_model_header(bare)
