import math

import numpy as np
import pytest

from xqdof.anchors import AnchorPoint, XqdModel
from xqdof.errors import EmptyMarksError
from xqdof.field import Mark, wrap_half_pi
from xqdof.fit import (
    OptCaps,
    ParamSelect,
    fit_qd,
    fit_xqd,
    insert_anchor,
    mark_deviations,
    mean_mark_deviation,
    objective,
    objective_gradient,
    optimize,
    strategy,
)
from xqdof.ofgrid import field_to_marks
from xqdof.qd import QdParams, evaluate_qd_field, qd_orientation, qd_params_from_world
from xqdof.synth import parse_grid, synth_model, synth_truth

GRID = parse_grid("20x20@12")


def _marks_from(model: XqdModel, grid=GRID):
    return field_to_marks(synth_truth(model, grid))


def _loop_qd(seed=0):
    return synth_model("loop", 0, seed, GRID).qd


def test_objective_zero_on_exact_fit():
    model = synth_model("loop", 3, 1, GRID)
    marks = _marks_from(model)
    assert objective(model, marks) == pytest.approx(0.0, abs=1e-18)


def test_objective_single_mark_values():
    qd = _loop_qd()
    model = XqdModel(qd=qd)
    x, y = 100.0, 150.0
    a = qd_orientation(x, y, qd)
    # antipodal on the doubled circle: |e^{2iA} - e^{2i(A-pi/2)}|^2 = 4
    m_quarter = Mark(x=x, y=y, theta=wrap_half_pi(a - math.pi / 2))
    assert objective(model, [m_quarter]) == pytest.approx(4.0, abs=1e-12)
    m_eighth = Mark(x=x, y=y, theta=wrap_half_pi(a - math.pi / 4))
    assert objective(model, [m_eighth]) == pytest.approx(2.0, abs=1e-12)


def test_objective_identity_4sin2():
    rng = np.random.default_rng(5)
    model = synth_model("loop", 4, 2, GRID)
    marks = [
        Mark(x=rng.uniform(0, 240), y=rng.uniform(0, 240),
             theta=rng.uniform(-math.pi / 2, math.pi / 2))
        for _ in range(100)
    ]
    got = objective(model, marks)
    from xqdof.anchors import xqd_orientation
    expect = sum(
        abs(np.exp(2j * xqd_orientation(m.x, m.y, model)) - np.exp(2j * m.theta)) ** 2
        for m in marks
    )
    assert got == pytest.approx(expect, abs=1e-9)


def test_objective_invariant_under_theta_plus_pi():
    model = synth_model("arch", 2, 3, GRID)
    rng = np.random.default_rng(6)
    marks = [Mark(x=rng.uniform(0, 240), y=rng.uniform(0, 240), theta=t)
             for t in rng.uniform(-1.5, 1.5, size=40)]
    shifted = [Mark(x=m.x, y=m.y, theta=m.theta + math.pi) for m in marks]
    assert objective(model, shifted) == pytest.approx(objective(model, marks), abs=1e-12)


def test_objective_empty_marks():
    with pytest.raises(EmptyMarksError):
        objective(XqdModel(qd=_loop_qd()), [])


def test_gradient_matches_manual_fd():
    model = synth_model("loop", 2, 7, GRID)
    marks = _marks_from(synth_model("loop", 5, 8, GRID))[::7]
    select = ParamSelect(qd=True)
    g = objective_gradient(model, marks, select)
    # manual central difference on R, using the same relative step
    h = 1e-3 * abs(model.qd.R)

    def obj_with_R(R):
        qd = qd_params_from_world(
            R=R, lam=model.qd.lam, rotation=model.qd.rotation,
            translation=model.qd.translation,
            world_cores=model.qd.core_world_positions(),
            world_deltas=model.qd.delta_world_positions(),
        )
        return objective(XqdModel(qd=qd, anchors=model.anchors), marks)

    manual = (obj_with_R(model.qd.R + h) - obj_with_R(model.qd.R - h)) / (2 * h)
    assert g[0] == pytest.approx(manual, rel=1e-6, abs=1e-12)


def test_gradient_richardson_self_consistency():
    rng = np.random.default_rng(9)
    for trial in range(5):
        model = synth_model("loop", 3, 20 + trial, GRID)
        truth = synth_model("loop", 6, 40 + trial, GRID)
        marks = _marks_from(truth)[:: int(rng.integers(3, 9))]
        select = ParamSelect(qd=True, anchors="all")
        g1 = objective_gradient(model, marks, select, step_scale=1.0)
        g2 = objective_gradient(model, marks, select, step_scale=0.5)
        assert np.linalg.norm(g1) > 0
        ratio = np.linalg.norm(g2) / np.linalg.norm(g1)
        assert abs(ratio - 1.0) < 0.05
        cos = np.dot(g1, g2) / (np.linalg.norm(g1) * np.linalg.norm(g2))
        assert cos > 0.999


def test_optimize_no_move_at_stationary_point():
    model = synth_model("loop", 2, 11, GRID)
    marks = _marks_from(model)
    out = optimize(model, marks, ParamSelect(qd=True, anchors="all"))
    assert out.qd.R == pytest.approx(model.qd.R, rel=1e-12)
    assert objective(out, marks) <= objective(model, marks) + 1e-15


def test_optimize_recovers_sigmas():
    qd = _loop_qd(13)
    true_anchor = AnchorPoint(a=120, b=140, theta=wrap_half_pi(
        qd_orientation(120, 140, qd) + 0.4), sigma1=30, sigma2=45)
    truth = XqdModel(qd=qd, anchors=[true_anchor])
    marks = _marks_from(truth)
    start = XqdModel(qd=qd, anchors=[
        AnchorPoint(a=120, b=140, theta=true_anchor.theta, sigma1=40, sigma2=36)])
    out = optimize(start, marks, ParamSelect(anchors=(0,), anchor_fields=("sigma1", "sigma2")),
                   OptCaps(max_iterations=200))
    assert out.anchors[0].sigma1 == pytest.approx(30, rel=0.1)
    assert out.anchors[0].sigma2 == pytest.approx(45, rel=0.1)


def test_optimize_never_increases_objective():
    model = synth_model("loop", 4, 15, GRID)
    truth = synth_model("loop", 8, 16, GRID)
    marks = _marks_from(truth)
    from xqdof.fit import _State, _optimize_state, _mark_arrays
    xs, ys, thetas = _mark_arrays(marks)
    st = _State.from_model(model)
    info = _optimize_state(st, ParamSelect(qd=True, anchors="all"), xs, ys, thetas,
                           OptCaps(max_iterations=40))
    trace = info.objective_trace
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
    assert info.iterations == len(trace) - 1


def test_fit_qd_stationary_start():
    truth = _loop_qd(21)
    marks = field_to_marks(evaluate_qd_field(truth, GRID))
    out = fit_qd(marks, truth.core_world_positions(), truth.delta_world_positions(),
                 init=truth)
    assert out.R == pytest.approx(truth.R, rel=1e-9)
    assert out.lam == pytest.approx(truth.lam, rel=1e-9)


def test_fit_qd_recovers_perturbed_init():
    truth = qd_params_from_world(
        R=80.0, lam=1.2, rotation=0.05, translation=(120.0, 20.0),
        world_cores=[(130.0, 150.0)], world_deltas=[(90.0, 70.0)],
    )
    # sample the active region well above the model axis
    grid = parse_grid("18x16@12")
    grid = type(grid)(cols=18, rows=16, spacing_px=12, origin_px=(6.0, 42.0))
    marks = field_to_marks(evaluate_qd_field(truth, grid))
    init = qd_params_from_world(
        R=88.0, lam=1.08, rotation=0.05, translation=(120.0, 20.0),
        world_cores=[(130.0, 150.0)], world_deltas=[(90.0, 70.0)],
    )
    out = fit_qd(marks, [(130.0, 150.0)], [(90.0, 70.0)], init=init,
                 caps=OptCaps(max_iterations=3000, ftol_rel=1e-14))
    assert out.R == pytest.approx(80.0, rel=0.02)
    assert out.lam == pytest.approx(1.2, rel=0.02)
    model = XqdModel(qd=out)
    assert objective(model, marks) < 1e-4


def test_fit_qd_flat_region_returns_init():
    # marks that the constant lower half-plane already explains perfectly
    init = QdParams(R=100.0, lam=1.0, rotation=0.0, translation=(120.0, 500.0))
    marks = [Mark(x=x, y=y, theta=0.0) for x in (10, 50, 90) for y in (10, 40)]
    out = fit_qd(marks, [], [], init=init)
    assert out.R == pytest.approx(init.R)
    assert out.translation == pytest.approx(init.translation)


def test_insert_anchor_noop_when_exact():
    model = synth_model("loop", 2, 31, GRID)
    marks = _marks_from(model)
    out = insert_anchor(model, marks)
    assert len(out.anchors) == len(model.anchors)


def test_insert_anchor_fixes_discordant_mark():
    from xqdof.fit import insert_anchor_detailed

    qd = _loop_qd(33)
    model = XqdModel(qd=qd)
    marks = field_to_marks(evaluate_qd_field(qd, GRID))
    bad = marks[210]
    marks[210] = Mark(x=bad.x, y=bad.y, theta=wrap_half_pi(bad.theta + 0.6))
    out, info = insert_anchor_detailed(model, marks, sigma_init=36.0)
    assert len(out.anchors) == 1
    assert info.chosen_mark == 210  # placed at the discordant mark
    assert math.hypot(out.anchors[0].a - bad.x, out.anchors[0].b - bad.y) < 12
    devs = mark_deviations(out, marks)
    assert devs[210] < 0.5  # degrees
    assert objective(out, marks) < objective(model, marks)


def test_insert_anchor_tie_break_first_in_scan_order():
    from xqdof.fit import insert_anchor_detailed

    qd = QdParams(R=100.0, lam=1.0, rotation=0.0, translation=(120.0, 500.0))
    # lower half-plane: model angle is 0 everywhere; two equally bad marks
    marks = [
        Mark(x=30, y=30, theta=0.0),
        Mark(x=60, y=30, theta=0.3),
        Mark(x=90, y=30, theta=0.3),
        Mark(x=120, y=30, theta=0.0),
    ]
    _, info = insert_anchor_detailed(XqdModel(qd=qd), marks, sigma_init=10.0)
    assert info.chosen_mark == 1


def test_fit_xqd_pure_qd_needs_no_anchors():
    truth = _loop_qd(41)
    marks = field_to_marks(evaluate_qd_field(truth, GRID))
    for name in ("S1", "S4"):
        model, report = fit_xqd(marks, truth.core_world_positions(),
                                truth.delta_world_positions(), name)
        assert report.anchors_used == 0
        assert report.deviation_deg < 0.1


def test_fit_xqd_respects_anchor_cap_and_trace():
    truth = synth_model("loop", 6, 43, GRID)
    marks = _marks_from(truth)
    strat = strategy("S1", anchor_iters=30, qd_iters=120)
    model, report = fit_xqd(marks, truth.qd.core_world_positions(),
                            truth.qd.delta_world_positions(), strat)
    assert report.anchors_used <= 3
    assert len(model.anchors) == report.anchors_used
    trace = report.objective_trace
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
    assert report.wall_time_s > 0
    assert report.deviation_deg == pytest.approx(mean_mark_deviation(model, marks))


def test_fit_xqd_deterministic():
    truth = synth_model("loop", 4, 47, GRID)
    marks = _marks_from(truth)
    strat = strategy("S2", anchor_iters=20, qd_iters=80, joint_iters=10)
    m1, r1 = fit_xqd(marks, truth.qd.core_world_positions(),
                     truth.qd.delta_world_positions(), strat)
    m2, r2 = fit_xqd(marks, truth.qd.core_world_positions(),
                     truth.qd.delta_world_positions(), strat)
    assert r1.objective_trace == r2.objective_trace
    assert r1.deviation_deg == r2.deviation_deg
    assert [a.a for a in m1.anchors] == [a.a for a in m2.anchors]


def test_fit_xqd_time_budget():
    truth = synth_model("loop", 8, 51, GRID)
    marks = _marks_from(truth)
    strat = strategy("S3", max_seconds=0.2, target_deviation_deg=0.0001)
    model, report = fit_xqd(marks, truth.qd.core_world_positions(),
                            truth.qd.delta_world_positions(), strat)
    assert "time budget exhausted" in report.warnings
