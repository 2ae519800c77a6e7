"""Least-squares fitting of anchor-corrected models to orientation marks.

The objective is the summed squared chord distance on the doubled circle,
sum_j |exp(2iA_j) - exp(2i theta_j)|^2 = sum_j 4 sin^2(A_j - theta_j),
minimized by steepest descent with central finite-difference gradients and a
backtracking Armijo line search.  Each parameter moves in its own natural
unit (pixels, radians, relative), which doubles as the FD step size.

Four built-in strategies trade speed against fidelity: S1 inserts a few
anchors and tunes only the newest one, S2 re-optimizes all anchors every
third insertion, S3 every insertion, and S4 additionally releases the global
parameters and singular-point positions at every insertion.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .anchors import GAUSSIAN, AnchorPoint, WeightKind, XqdModel
from .errors import EmptyMarksError
from .field import wrap_half_pi, wrap_half_pi_array
from .qd import QdParams, qd_params_from_world

# finite-difference steps per parameter family
STEP_POSITION_PX = 0.5
STEP_ANGLE_RAD = 1e-3
STEP_SIGMA_PX = 0.5
STEP_RELATIVE = 1e-3  # for R and lambda

# descent scaling: the "one unit" of each parameter family, chosen so a unit
# move perturbs the field by a comparable amount; keeps steepest descent from
# crawling along whichever axis has the smallest raw scale
UNIT_POSITION_PX = 1.0
UNIT_ANGLE_RAD = 0.01
UNIT_SIGMA_PX = 1.0
UNIT_RELATIVE = 0.01

SIGMA_INIT_FACTOR = 3.0  # initial anchor extent, in grid spacings
NOOP_DEVIATION_RAD = 1e-9  # insert_anchor declines below this residual

_V_FLOOR = 1e-6  # singular points must stay this far above the model axis


def sigma_init_for_spacing(spacing_px: float) -> float:
    return SIGMA_INIT_FACTOR * spacing_px


@dataclass
class OptCaps:
    """Budgets for one optimize() call."""

    max_iterations: int = 500
    max_halvings: int = 40
    armijo: float = 1e-4
    ftol_rel: float = 1e-10
    max_seconds: float | None = None


@dataclass(frozen=True)
class ParamSelect:
    """Which parameters an optimize() call may move.

    qd releases R, lambda, rotation and translation; singular_points the
    world positions of cores/deltas; anchors is a tuple of anchor indices
    (or "all"), each contributing the fields named in anchor_fields.
    """

    qd: bool = False
    singular_points: bool = False
    anchors: tuple[int, ...] | str = ()
    anchor_fields: tuple[str, ...] = ("a", "b", "theta", "sigma1", "sigma2")

    def anchor_indices(self, n: int) -> tuple[int, ...]:
        if self.anchors == "all":
            return tuple(range(n))
        return tuple(self.anchors)


@dataclass
class FitStrategy:
    """Insertion/re-optimization policy plus per-phase iteration budgets.

    With reopt_qd set, every joint pass re-optimizes all anchors, nudges the
    global parameters and singular points (block-coordinate, to keep the
    descent well conditioned), re-converges the anchors, and a deep joint
    polish runs once insertion stops.
    """

    name: str
    max_anchors: int
    reopt_every: int  # all-anchors re-optimization cadence in insertions; 0 = never
    reopt_qd: bool = False  # also reconsider QD params + singular points
    qd_reopt_every: int = 5  # QD-block cadence in insertions (reopt_qd only)
    target_deviation_deg: float | None = 0.05
    max_seconds: float | None = None
    qd_iters: int = 300
    anchor_iters: int = 60
    joint_iters: int = 30
    qd_block_iters: int = 5
    polish_iters: int = 60  # final polish (reopt_qd strategies only); 0 disables
    polish_rounds: int = 2


STRATEGIES: dict[str, FitStrategy] = {
    "S1": FitStrategy(name="S1", max_anchors=3, reopt_every=0),
    "S2": FitStrategy(name="S2", max_anchors=8, reopt_every=3),
    "S3": FitStrategy(name="S3", max_anchors=20, reopt_every=1),
    "S4": FitStrategy(name="S4", max_anchors=20, reopt_every=1, reopt_qd=True),
}


def strategy(name: str, **overrides) -> FitStrategy:
    """A copy of a built-in strategy, optionally with overridden fields."""
    base = STRATEGIES[name.upper()]
    return replace(base, **overrides)


@dataclass
class FitReport:
    final_objective: float
    deviation_deg: float
    anchors_used: int
    iterations: int
    wall_time_s: float
    objective_trace: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "final_objective": self.final_objective,
            "deviation_deg": self.deviation_deg,
            "anchors_used": self.anchors_used,
            "iterations": self.iterations,
            "wall_time_s": self.wall_time_s,
            "objective_trace": list(self.objective_trace),
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# internal mutable fit state
# ---------------------------------------------------------------------------


class _State:
    """Flat, mutable view of a model: frame scalars, world-space singular
    points and the anchor array.  Singular points are stored in world pixels
    so the frame can move while they stay put."""

    def __init__(self, R, lam, rotation, tx, ty, cores_w, deltas_w,
                 anchors, weight_code, tent_radius):
        self.R = float(R)
        self.lam = float(lam)
        self.rotation = float(rotation)
        self.tx = float(tx)
        self.ty = float(ty)
        self.cores_w = np.asarray(cores_w, dtype=float).reshape(-1, 2)
        self.deltas_w = np.asarray(deltas_w, dtype=float).reshape(-1, 2)
        self.anchors = np.asarray(anchors, dtype=float).reshape(-1, 5)
        self.weight_code = int(weight_code)
        self.tent_radius = float(tent_radius)
        # trust region for released singular points: (cores_ref, deltas_ref, radius)
        self.sing_bounds: tuple[np.ndarray, np.ndarray, float] | None = None

    def set_singular_bounds(self, cores_ref, deltas_ref, radius: float) -> None:
        self.sing_bounds = (
            np.asarray(cores_ref, dtype=float).reshape(-1, 2),
            np.asarray(deltas_ref, dtype=float).reshape(-1, 2),
            float(radius),
        )

    @classmethod
    def from_model(cls, model: XqdModel) -> "_State":
        qd = model.qd
        return cls(
            qd.R, qd.lam, qd.rotation, qd.translation[0], qd.translation[1],
            [list(p) for p in qd.core_world_positions()],
            [list(p) for p in qd.delta_world_positions()],
            model.anchor_array(), model.weight.code, model.weight.tent_radius,
        )

    def copy(self) -> "_State":
        st = _State(self.R, self.lam, self.rotation, self.tx, self.ty,
                    self.cores_w.copy(), self.deltas_w.copy(),
                    self.anchors.copy(), self.weight_code, self.tent_radius)
        st.sing_bounds = self.sing_bounds
        return st

    def _singular_model_coords(self):
        """(cores, deltas) as stretched model coordinates, or None if any
        point sits on or below the model axis."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)

        def convert(points):
            out = np.zeros(len(points), dtype=complex)
            for i, (px, py) in enumerate(points):
                dx, dy = px - self.tx, py - self.ty
                u = c * dx + s * dy
                v = -s * dx + c * dy
                if v <= _V_FLOOR:
                    return None
                out[i] = complex(u, self.lam * v)
            return out

        cores = convert(self.cores_w)
        if cores is None:
            return None
        deltas = convert(self.deltas_w)
        if deltas is None:
            return None
        return cores, deltas

    def valid(self) -> bool:
        if not (self.R > 0 and self.lam > 0):
            return False
        if self.anchors.shape[0] and (self.anchors[:, 3:] <= 0).any():
            return False
        if self.sing_bounds is not None:
            cores_ref, deltas_ref, radius = self.sing_bounds
            for arr, ref in ((self.cores_w, cores_ref), (self.deltas_w, deltas_ref)):
                if arr.shape[0] and np.hypot(*(arr - ref).T).max() > radius:
                    return False
        return self._singular_model_coords() is not None

    def orientations(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        coords = self._singular_model_coords()
        if coords is None:
            raise ValueError("singular point below the model axis")
        cores, deltas = coords
        return kernels.xqd_orientations(
            xs, ys, self.R, self.lam, self.rotation, self.tx, self.ty,
            cores, deltas, self.anchors, self.weight_code, self.tent_radius,
        )

    def objective(self, xs: np.ndarray, ys: np.ndarray, thetas: np.ndarray) -> float:
        if not self.valid():
            return math.inf
        return kernels.objective_sum(self.orientations(xs, ys), thetas)

    def to_model(self) -> XqdModel:
        qd = qd_params_from_world(
            R=self.R, lam=self.lam, rotation=self.rotation,
            translation=(self.tx, self.ty),
            world_cores=[tuple(p) for p in self.cores_w],
            world_deltas=[tuple(p) for p in self.deltas_w],
        )
        anchors = tuple(
            AnchorPoint(a=row[0], b=row[1], theta=wrap_half_pi(row[2]),
                        sigma1=row[3], sigma2=row[4])
            for row in self.anchors
        )
        if self.weight_code == kernels.WEIGHT_TENT:
            weight = WeightKind("tent", tent_radius=self.tent_radius)
        else:
            weight = GAUSSIAN
        return XqdModel(qd=qd, anchors=anchors, weight=weight)


def _mark_arrays(marks) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not marks:
        raise EmptyMarksError("at least one orientation mark is required")
    xs = np.asarray([m.x for m in marks], dtype=float)
    ys = np.asarray([m.y for m in marks], dtype=float)
    thetas = np.asarray([m.theta for m in marks], dtype=float)
    return xs, ys, thetas


class _Evaluator:
    """Objective evaluation with per-anchor caching.

    The corrected angle satisfies A = base + sum_i w_i*shift_i (mod pi) and
    the objective is pi-periodic, so base (global model at the marks) and
    each anchor's weighted contribution can be cached independently.  A
    finite-difference probe of one anchor then costs one weight evaluation
    instead of a full model sweep.
    """

    QD = -1  # dirty tag for the global parameters

    def __init__(self, state: _State, xs, ys, thetas):
        self.state = state
        self.xs, self.ys, self.thetas = xs, ys, thetas
        n = state.anchors.shape[0]
        self._base: np.ndarray | None = None
        self._contrib = np.zeros((n, len(xs)))
        self._anchor_dirty = set(range(n))

    def dirty(self, tag: int) -> None:
        if tag == self.QD:
            self._base = None
            self._anchor_dirty = set(range(self.state.anchors.shape[0]))
        else:
            self._anchor_dirty.add(tag)

    def _refresh(self) -> bool:
        st = self.state
        if not st.valid():
            return False
        if self._base is None:
            coords = st._singular_model_coords()
            cores, deltas = coords
            self._qd_args = (st.R, st.lam, st.rotation, st.tx, st.ty, cores, deltas)
            self._base = kernels.qd_orientations(self.xs, self.ys, *self._qd_args)
        for i in self._anchor_dirty:
            a, b, theta, s1, s2 = self.state.anchors[i]
            base_at = kernels.qd_orientations(
                np.asarray([a]), np.asarray([b]), *self._qd_args)[0]
            shift = wrap_half_pi(theta - base_at)
            w = kernels.anchor_weight_values(
                self.xs, self.ys, a, b, theta, s1, s2,
                st.weight_code, st.tent_radius)
            self._contrib[i, :] = w * shift
        self._anchor_dirty.clear()
        return True

    def objective(self) -> float:
        if not self._refresh():
            return math.inf
        angles = self._base + self._contrib.sum(axis=0)
        return kernels.objective_sum(angles, self.thetas)


# ---------------------------------------------------------------------------
# parameter vector plumbing
# ---------------------------------------------------------------------------

_ANCHOR_FIELD_INDEX = {"a": 0, "b": 1, "theta": 2, "sigma1": 3, "sigma2": 4}
_ANCHOR_FIELD_STEP = {
    "a": STEP_POSITION_PX, "b": STEP_POSITION_PX, "theta": STEP_ANGLE_RAD,
    "sigma1": STEP_SIGMA_PX, "sigma2": STEP_SIGMA_PX,
}
_ANCHOR_FIELD_UNIT = {
    "a": UNIT_POSITION_PX, "b": UNIT_POSITION_PX, "theta": UNIT_ANGLE_RAD,
    "sigma1": UNIT_SIGMA_PX, "sigma2": UNIT_SIGMA_PX,
}


class _Param:
    __slots__ = ("get", "set", "step", "unit", "tag")

    def __init__(self, get, set_, step, unit, tag):
        self.get = get
        self.set = set_
        self.step = step
        self.unit = unit
        self.tag = tag  # _Evaluator.QD or an anchor index


def _build_params(state: _State, select: ParamSelect) -> list[_Param]:
    params: list[_Param] = []

    def scalar(name: str, relative: bool = False, fixed_step: float = 0.0,
               fixed_unit: float = 0.0):
        def get():
            return getattr(state, name)

        def set_(v):
            setattr(state, name, float(v))

        if relative:
            def step():
                return STEP_RELATIVE * max(abs(getattr(state, name)), 1e-6)

            def unit():
                return UNIT_RELATIVE * max(abs(getattr(state, name)), 1e-6)
        else:
            def step():
                return fixed_step

            def unit():
                return fixed_unit

        params.append(_Param(get, set_, step, unit, _Evaluator.QD))

    if select.qd:
        scalar("R", relative=True)
        scalar("lam", relative=True)
        scalar("rotation", fixed_step=STEP_ANGLE_RAD, fixed_unit=UNIT_ANGLE_RAD)
        scalar("tx", fixed_step=STEP_POSITION_PX, fixed_unit=UNIT_POSITION_PX)
        scalar("ty", fixed_step=STEP_POSITION_PX, fixed_unit=UNIT_POSITION_PX)

    if select.singular_points:
        for arr in (state.cores_w, state.deltas_w):
            for i in range(arr.shape[0]):
                for j in (0, 1):
                    def get(arr=arr, i=i, j=j):
                        return arr[i, j]

                    def set_(v, arr=arr, i=i, j=j):
                        arr[i, j] = v

                    params.append(_Param(get, set_, lambda: STEP_POSITION_PX,
                                         lambda: UNIT_POSITION_PX, _Evaluator.QD))

    for idx in select.anchor_indices(state.anchors.shape[0]):
        for name in select.anchor_fields:
            j = _ANCHOR_FIELD_INDEX[name]
            h = _ANCHOR_FIELD_STEP[name]
            u = _ANCHOR_FIELD_UNIT[name]

            def get(i=idx, j=j):
                return state.anchors[i, j]

            def set_(v, i=idx, j=j):
                state.anchors[i, j] = v

            params.append(_Param(get, set_, lambda h=h: h, lambda u=u: u, idx))

    return params


def _fd_gradient(ev: _Evaluator, params: list[_Param],
                 step_scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient and the descent unit per parameter."""
    g = np.zeros(len(params))
    units = np.zeros(len(params))
    for i, p in enumerate(params):
        v0 = p.get()
        h = p.step() * step_scale
        for _ in range(3):
            p.set(v0 + h)
            ev.dirty(p.tag)
            f_plus = ev.objective()
            p.set(v0 - h)
            ev.dirty(p.tag)
            f_minus = ev.objective()
            p.set(v0)
            ev.dirty(p.tag)
            if math.isfinite(f_plus) and math.isfinite(f_minus):
                g[i] = (f_plus - f_minus) / (2.0 * h)
                break
            h /= 8.0  # parameter sits near a validity boundary
        units[i] = p.unit()
    return g, units


@dataclass
class OptInfo:
    iterations: int = 0
    converged: bool = False
    objective_trace: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    chosen_mark: int | None = None  # set by insert_anchor_detailed


def _optimize_state(state: _State, select: ParamSelect, xs, ys, thetas,
                    caps: OptCaps) -> OptInfo:
    """Steepest descent on the selected parameters, in place.

    The descent direction is the negative gradient scaled by the squared
    per-parameter units (plain steepest descent in unit-rescaled variables),
    so pixels and radians move at comparable rates.
    """
    info = OptInfo()
    params = _build_params(state, select)
    if not params:
        info.converged = True
        return info
    ev = _Evaluator(state, xs, ys, thetas)
    tags = sorted({p.tag for p in params})

    def dirty_all():
        for t in tags:
            ev.dirty(t)

    f0 = ev.objective()
    info.objective_trace.append(f0)
    if not math.isfinite(f0):
        info.warnings.append("initial parameters invalid")
        return info
    t_start = time.perf_counter()
    alpha_start = 1.0  # carried across iterations: grows after easy accepts

    for _ in range(caps.max_iterations):
        if caps.max_seconds is not None and time.perf_counter() - t_start > caps.max_seconds:
            info.warnings.append("optimize time budget exhausted")
            return info

        v0 = np.array([p.get() for p in params])
        accepted = False
        # a full-size FD step can straddle a branch kink (a mark crossing the
        # model axis or a wrap boundary) and flip the gradient sign; retry
        # with smaller steps before giving up
        for fd_scale in (1.0, 1.0 / 32.0, 1.0 / 1024.0):
            g, units = _fd_gradient(ev, params, step_scale=fd_scale)
            direction = -g * units * units
            slope = float(np.dot(g, direction))
            if slope >= -1e-18:
                continue
            alpha = alpha_start
            for _ in range(caps.max_halvings):
                for p, v, d in zip(params, v0, direction):
                    p.set(v + alpha * d)
                dirty_all()
                f_try = ev.objective()
                if f_try <= f0 + caps.armijo * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
            for p, v in zip(params, v0):
                p.set(v)
            dirty_all()
        if not accepted:
            info.converged = True  # stationary, or no acceptable step at any scale
            return info
        # let the trial step scale grow again after every accepted step
        alpha_start = min(alpha * 2.0, 1e6)

        # keep anchor orientations canonical; the objective is pi-periodic
        if state.anchors.shape[0]:
            wrapped = wrap_half_pi_array(state.anchors[:, 2])
            changed = np.nonzero(wrapped != state.anchors[:, 2])[0]
            if changed.size:
                state.anchors[:, 2] = wrapped
                for i in changed:
                    ev.dirty(int(i))
        improvement = f0 - f_try
        f0 = f_try
        info.iterations += 1
        info.objective_trace.append(f0)
        if improvement <= max(caps.ftol_rel * f0, 1e-14):
            info.converged = True
            return info

    info.warnings.append("iteration cap reached")
    return info


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def objective(model: XqdModel, marks) -> float:
    """Doubled-circle squared-chord misfit; zero iff every mark matches mod pi."""
    xs, ys, thetas = _mark_arrays(marks)
    return _State.from_model(model).objective(xs, ys, thetas)


def mark_deviations(model: XqdModel, marks) -> np.ndarray:
    """Per-mark undirected angular error in degrees."""
    xs, ys, thetas = _mark_arrays(marks)
    angles = _State.from_model(model).orientations(xs, ys)
    return np.abs(wrap_half_pi_array(angles - thetas)) * 180.0 / math.pi


def mean_mark_deviation(model: XqdModel, marks) -> float:
    return float(np.mean(mark_deviations(model, marks)))


def objective_gradient(model: XqdModel, marks, select: ParamSelect,
                       step_scale: float = 1.0) -> np.ndarray:
    """Central finite-difference gradient of the objective (test hook)."""
    xs, ys, thetas = _mark_arrays(marks)
    state = _State.from_model(model)
    params = _build_params(state, select)
    ev = _Evaluator(state, xs, ys, thetas)
    g, _ = _fd_gradient(ev, params, step_scale=step_scale)
    return g


def optimize(model: XqdModel, marks, select: ParamSelect,
             caps: OptCaps | None = None) -> XqdModel:
    """Locally minimize the objective over the selected parameters."""
    xs, ys, thetas = _mark_arrays(marks)
    state = _State.from_model(model)
    _optimize_state(state, select, xs, ys, thetas, caps or OptCaps())
    return state.to_model()


def default_qd_init(marks, cores, deltas) -> QdParams:
    """Heuristic starting frame: axis below the marked area (and below every
    supplied singular point), origin at the horizontal centroid."""
    xs, ys, _ = _mark_arrays(marks)
    width = max(float(xs.max() - xs.min()), 1.0)
    height = max(float(ys.max() - ys.min()), 1.0)
    axis_y = float(ys.min()) + 0.15 * height
    sing_ys = [p[1] for p in list(cores) + list(deltas)]
    if sing_ys:
        axis_y = min(axis_y, min(sing_ys) - 0.1 * height)
    return qd_params_from_world(
        R=0.45 * width, lam=1.0, rotation=0.0,
        translation=(float(xs.mean()), axis_y),
        world_cores=list(cores), world_deltas=list(deltas),
    )


def fit_qd(marks, cores, deltas, init: QdParams | None = None,
           caps: OptCaps | None = None) -> QdParams:
    """Fit the global model only, holding singular points at their supplied
    world positions."""
    qd, _ = fit_qd_detailed(marks, cores, deltas, init=init, caps=caps)
    return qd


def fit_qd_detailed(marks, cores, deltas, init: QdParams | None = None,
                    caps: OptCaps | None = None) -> tuple[QdParams, OptInfo]:
    xs, ys, thetas = _mark_arrays(marks)
    if init is None:
        init = default_qd_init(marks, cores, deltas)
    else:
        # re-anchor the supplied singular positions onto the init frame
        init = qd_params_from_world(
            R=init.R, lam=init.lam, rotation=init.rotation, translation=init.translation,
            world_cores=list(cores), world_deltas=list(deltas),
        )
    state = _State.from_model(XqdModel(qd=init))
    info = _optimize_state(state, ParamSelect(qd=True), xs, ys, thetas,
                           caps or OptCaps(max_iterations=300))
    if not info.converged and "iteration cap reached" in info.warnings:
        info.warnings.append("qd fit did not converge; returning best so far")
    return state.to_model().qd, info


def insert_anchor(model: XqdModel, marks, sigma_init: float = 36.0,
                  caps: OptCaps | None = None) -> XqdModel:
    """Add one anchor at the worst-fitting mark and tune its five parameters.

    No-op when every mark is already matched to within ~1e-9 rad.  The new
    anchor's extents are halved (and the anchor re-tuned) until the objective
    strictly improves on the pre-insertion value, so successive insertions
    never increase the misfit.
    """
    grown, _ = insert_anchor_detailed(model, marks, sigma_init=sigma_init, caps=caps)
    return grown


def insert_anchor_detailed(model: XqdModel, marks, sigma_init: float = 36.0,
                           caps: OptCaps | None = None) -> tuple[XqdModel, OptInfo]:
    xs, ys, thetas = _mark_arrays(marks)
    state = _State.from_model(model)
    angles = state.orientations(xs, ys)
    residual = np.abs(wrap_half_pi_array(angles - thetas))
    worst = int(np.argmax(residual))  # first maximum in mark order
    info = OptInfo(converged=True)
    if residual[worst] < NOOP_DEVIATION_RAD:
        return model, info
    info.chosen_mark = worst
    pre_obj = state.objective(xs, ys, thetas)

    caps = caps or OptCaps(max_iterations=60)
    trial = state.copy()
    new_row = np.array([[xs[worst], ys[worst], thetas[worst], sigma_init, sigma_init]])
    trial.anchors = np.vstack([state.anchors, new_row])
    idx = trial.anchors.shape[0] - 1
    # a wide correction can hurt well-fit neighbors more than it helps the
    # worst mark; shrink the initial extent until the raw insertion already
    # improves the objective (it must, once the correction is local enough)
    sigma = sigma_init
    for _ in range(20):
        trial.anchors[idx, 3] = trial.anchors[idx, 4] = sigma
        if trial.objective(xs, ys, thetas) < pre_obj:
            break
        sigma *= 0.5
    local = _optimize_state(trial, ParamSelect(anchors=(idx,)), xs, ys, thetas, caps)
    info.iterations += local.iterations
    if trial.objective(xs, ys, thetas) < pre_obj:
        return trial.to_model(), info
    info.warnings.append("insertion could not improve the objective")
    return model, info  # nothing helped; leave the model untouched


def _joint_passes(model: XqdModel, strat: FitStrategy, cores, deltas,
                  sigma_init: float, xs, ys, thetas, deadline,
                  final: bool, insertions: int = 0) -> tuple[XqdModel, int]:
    """One joint re-optimization round per the strategy policy.

    Every round re-converges all anchors.  QD-releasing strategies then add a
    bounded global-parameter block (plus anchor re-convergence) every
    qd_reopt_every insertions; a mid-fit global block at every insertion was
    measured to derail the greedy placements.  The final polish interleaves
    global and anchor passes with larger budgets.
    """
    anchors_sel = ParamSelect(anchors="all")
    global_sel = ParamSelect(qd=True, singular_points=True, anchors="all")
    if final:
        blocks = [(global_sel, strat.polish_iters),
                  (anchors_sel, strat.polish_iters)] * strat.polish_rounds
    else:
        blocks = [(anchors_sel, strat.joint_iters)]
        if (strat.reopt_qd and strat.qd_reopt_every
                and insertions % strat.qd_reopt_every == 0):
            blocks += [(global_sel, strat.qd_block_iters),
                       (anchors_sel, strat.joint_iters)]
    spent = 0
    for select, iters in blocks:
        if deadline is not None and time.perf_counter() > deadline:
            break
        st = _State.from_model(model)
        if select.singular_points:
            # the supplied singular marks are trusted; reconsider their exact
            # positions only within a grid-cell-scale radius
            st.set_singular_bounds(
                np.asarray(list(cores), dtype=float).reshape(-1, 2),
                np.asarray(list(deltas), dtype=float).reshape(-1, 2),
                sigma_init / SIGMA_INIT_FACTOR,
            )
        info = _optimize_state(
            st, select, xs, ys, thetas,
            OptCaps(max_iterations=iters,
                    max_seconds=None if deadline is None
                    else max(0.0, deadline - time.perf_counter())),
        )
        spent += info.iterations
        model = st.to_model()
    return model, spent


def fit_xqd(marks, cores, deltas, strat: FitStrategy | str = "S4",
            weight: WeightKind = GAUSSIAN, init: QdParams | None = None,
            sigma_init: float | None = None) -> tuple[XqdModel, FitReport]:
    """Full pipeline: global fit, then anchor insertion per strategy policy."""
    if isinstance(strat, str):
        strat = STRATEGIES[strat.upper()]
    xs, ys, thetas = _mark_arrays(marks)
    if sigma_init is None:
        sigma_init = 36.0
    t_start = time.perf_counter()
    deadline = None if strat.max_seconds is None else t_start + strat.max_seconds

    warnings: list[str] = []
    trace: list[float] = []
    iterations = 0

    qd, qd_info = fit_qd_detailed(
        marks, cores, deltas, init=init,
        caps=OptCaps(max_iterations=strat.qd_iters,
                     max_seconds=strat.max_seconds),
    )
    iterations += qd_info.iterations
    if qd_info.objective_trace:
        trace.append(qd_info.objective_trace[0])
    model = XqdModel(qd=qd, weight=weight)
    state = _State.from_model(model)
    current_obj = state.objective(xs, ys, thetas)
    trace.append(current_obj)

    def deviation_now(m: XqdModel) -> float:
        return mean_mark_deviation(m, marks)

    deviation = deviation_now(model)
    budget_hit = False

    insertions = 0
    while insertions < strat.max_anchors:
        if strat.target_deviation_deg is not None and deviation <= strat.target_deviation_deg:
            break
        if deadline is not None and time.perf_counter() > deadline:
            budget_hit = True
            break

        grown, ins_info = insert_anchor_detailed(
            model, marks, sigma_init=sigma_init,
            caps=OptCaps(max_iterations=strat.anchor_iters),
        )
        iterations += ins_info.iterations
        if len(grown.anchors) == len(model.anchors):
            break  # no-op: nothing left to fix or no improving insertion
        model = grown
        insertions += 1

        if strat.reopt_every and insertions % strat.reopt_every == 0:
            model, spent = _joint_passes(model, strat, cores, deltas, sigma_init,
                                         xs, ys, thetas, deadline, final=False,
                                         insertions=insertions)
            iterations += spent

        current_obj = objective(model, marks)
        trace.append(current_obj)
        deviation = deviation_now(model)

    target_met = (strat.target_deviation_deg is not None
                  and deviation <= strat.target_deviation_deg)
    if strat.reopt_qd and strat.polish_iters and insertions and not budget_hit and not target_met:
        model, spent = _joint_passes(model, strat, cores, deltas, sigma_init,
                                     xs, ys, thetas, deadline, final=True)
        iterations += spent
        current_obj = objective(model, marks)
        trace.append(current_obj)
        deviation = deviation_now(model)

    if budget_hit:
        warnings.append("time budget exhausted")
        if strat.target_deviation_deg is not None and deviation > strat.target_deviation_deg:
            warnings.append("target deviation not reached")

    report = FitReport(
        final_objective=current_obj,
        deviation_deg=deviation,
        anchors_used=len(model.anchors),
        iterations=iterations,
        wall_time_s=time.perf_counter() - t_start,
        objective_trace=trace,
        warnings=warnings + qd_info.warnings,
    )
    return model, report
