"""Session-based HTTP/JSON API for interactive orientation-field marking.

Workflow per session: mark singular points, add sparse orientation marks,
run a fit (asynchronously, polled via GET .../fit), inspect the fitted field,
insert manual anchors, export the .xqd bytes.  Angles cross the wire in
degrees [0, 180); radians stay internal.
"""

from __future__ import annotations

import base64
import json
import math
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .anchors import MAX_ANCHORS_ENCODABLE, AnchorPoint, XqdModel, xqd_orientations_at
from .codec import decode, encode, parameter_count
from .field import GridSpec, Mark, wrap_half_pi
from .fit import OptCaps, ParamSelect, fit_xqd, optimize, sigma_init_for_spacing, strategy

MAX_SINGULAR_PER_KIND = 2


def _deg_to_rad(deg: float) -> float:
    return wrap_half_pi(math.radians(deg))


def _rad_to_deg(rad: float) -> float:
    deg = math.degrees(rad) % 180.0
    return 0.0 if deg >= 180.0 else deg


@dataclass
class _FitJob:
    status: str = "none"  # none | running | done | failed
    report: dict | None = None
    error: str | None = None
    revision: int = -1


@dataclass
class Session:
    id: str
    grid: GridSpec
    image: bytes | None = None
    image_type: str = "application/octet-stream"
    cores: list[tuple[float, float]] = field(default_factory=list)
    deltas: list[tuple[float, float]] = field(default_factory=list)
    marks: list[Mark] = field(default_factory=list)
    model: XqdModel | None = None
    model_revision: int = -1
    revision: int = 0
    fit: _FitJob = field(default_factory=_FitJob)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def bump(self) -> None:
        self.revision += 1

    @property
    def stale(self) -> bool:
        return self.model is not None and self.model_revision != self.revision

    def model_summary(self) -> dict | None:
        if self.model is None:
            return None
        return {
            "anchors": len(self.model.anchors),
            "cores": len(self.model.qd.cores),
            "deltas": len(self.model.qd.deltas),
            "parameter_count": parameter_count(self.model),
            "encoded_bytes": len(encode(self.model)),
            "stale": self.stale,
        }


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _parse_grid_doc(doc: dict) -> GridSpec:
    spacing = float(doc["spacing_px"])
    origin = doc.get("origin_px")
    if origin is None:
        origin = (spacing / 2.0, spacing / 2.0)
    return GridSpec(cols=int(doc["cols"]), rows=int(doc["rows"]),
                    spacing_px=spacing, origin_px=(float(origin[0]), float(origin[1])))


def create_app(snapshot_path: str | None = None) -> FastAPI:
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if snapshot_path and Path(snapshot_path).exists():
            _load_snapshot(snapshot_path, sessions)
        yield
        if snapshot_path:
            _write_snapshot(snapshot_path, sessions)

    app = FastAPI(title="xqdof marking service", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    def get_session(session_id: str) -> Session | None:
        with registry_lock:
            return sessions.get(session_id)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        content_type = request.headers.get("content-type", "")
        image = None
        image_type = "application/octet-stream"
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            if "grid" not in form:
                return _error(400, "multipart body needs a 'grid' JSON field")
            try:
                grid_doc = json.loads(form["grid"])
            except (TypeError, json.JSONDecodeError):
                return _error(400, "grid field is not valid JSON")
            upload = form.get("image")
            if upload is not None and hasattr(upload, "read"):
                image = await upload.read()
                image_type = upload.content_type or image_type
        else:
            try:
                body = await request.json()
            except json.JSONDecodeError:
                return _error(400, "body must be JSON")
            grid_doc = body.get("grid") if isinstance(body, dict) else None
        if not isinstance(grid_doc, dict):
            return _error(400, "missing grid specification")
        try:
            grid = _parse_grid_doc(grid_doc)
        except (KeyError, TypeError, ValueError) as exc:
            return _error(400, f"bad grid: {exc}")
        session = Session(id=uuid.uuid4().hex, grid=grid, image=image,
                          image_type=image_type)
        with registry_lock:
            sessions[session.id] = session
        return {"id": session.id, "revision": session.revision}

    @app.get("/sessions/{session_id}/image")
    def get_image(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        if session.image is None:
            return _error(404, "session has no image")
        return Response(content=session.image, media_type=session.image_type)

    @app.post("/sessions/{session_id}/singular-points")
    async def add_singular_point(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        try:
            body = await request.json()
            kind = body["kind"]
            x, y = float(body["x"]), float(body["y"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            return _error(400, "body needs kind (core|delta), x, y")
        if kind not in ("core", "delta"):
            return _error(400, f"kind must be core or delta, got {kind!r}")
        if not (math.isfinite(x) and math.isfinite(y)):
            return _error(400, "coordinates must be finite")
        with session.lock:
            target = session.cores if kind == "core" else session.deltas
            if len(target) >= MAX_SINGULAR_PER_KIND:
                return _error(409, f"a fingerprint cannot contain more than "
                                   f"{MAX_SINGULAR_PER_KIND} {kind}s")
            target.append((x, y))
            session.bump()
            return {"cores": len(session.cores), "deltas": len(session.deltas),
                    "revision": session.revision}

    @app.post("/sessions/{session_id}/marks")
    async def add_marks(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "body must be JSON")
        if not isinstance(body, list):
            return _error(400, "body must be a list of {x, y, theta_deg}")
        new_marks = []
        for item in body:
            try:
                x, y = float(item["x"]), float(item["y"])
                theta_deg = float(item["theta_deg"])
            except (KeyError, TypeError, ValueError):
                return _error(400, "each mark needs x, y, theta_deg")
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta_deg)):
                return _error(400, "mark values must be finite")
            new_marks.append(Mark(x=x, y=y, theta=_deg_to_rad(theta_deg)))
        with session.lock:
            session.marks.extend(new_marks)
            session.bump()
            return {"marks": len(session.marks), "revision": session.revision}

    @app.post("/sessions/{session_id}/fit", status_code=202)
    async def start_fit(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            body = {}
        name = str(body.get("strategy", "S2")).upper()
        if name not in ("S1", "S2", "S3", "S4"):
            return _error(400, f"unknown strategy {name!r}")
        overrides = {}
        if body.get("target_deg") is not None:
            overrides["target_deviation_deg"] = float(body["target_deg"])
        if body.get("max_seconds") is not None:
            overrides["max_seconds"] = float(body["max_seconds"])
        with session.lock:
            if not session.marks:
                return _error(409, "no marks to fit against")
            if session.fit.status == "running":
                return _error(409, "a fit is already running for this session")
            session.fit = _FitJob(status="running", revision=session.revision)
            marks = list(session.marks)
            cores = list(session.cores)
            deltas = list(session.deltas)
            job = session.fit

        strat = strategy(name, **overrides)
        sigma_init = sigma_init_for_spacing(session.grid.spacing_px)

        def run():
            try:
                model, report = fit_xqd(marks, cores, deltas, strat,
                                        sigma_init=sigma_init)
            except Exception as exc:  # surfaced to the poller
                job.status = "failed"
                job.error = str(exc)
                return
            payload = report.to_dict()
            payload["strategy"] = strat.name
            with session.lock:
                session.model = model
                session.model_revision = job.revision
                job.report = payload
                job.status = "done"

        threading.Thread(target=run, daemon=True).start()
        return {"status": "running", "revision": job.revision}

    @app.get("/sessions/{session_id}/fit")
    def fit_status(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        job = session.fit
        return {
            "status": job.status,
            "report": job.report,
            "error": job.error,
            "model": session.model_summary(),
        }

    @app.get("/sessions/{session_id}/field")
    def get_field(session_id: str, stride: int = 1):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        if stride < 1:
            return _error(400, f"stride must be >= 1, got {stride}")
        with session.lock:
            if session.model is None:
                return _error(409, "no fitted model yet")
            model = session.model
            stale = session.stale
        grid = session.grid
        samples = []
        import numpy as np

        cols = range(0, grid.cols, stride)
        rows = range(0, grid.rows, stride)
        xs = [grid.cell_center(c, r)[0] for r in rows for c in cols]
        ys = [grid.cell_center(c, r)[1] for r in rows for c in cols]
        angles = xqd_orientations_at(np.asarray(xs), np.asarray(ys), model)
        for x, y, a in zip(xs, ys, angles):
            samples.append({"x": x, "y": y, "theta_deg": _rad_to_deg(float(a))})
        return {"stale": stale, "samples": samples}

    @app.post("/sessions/{session_id}/anchors")
    async def add_anchor(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        try:
            body = await request.json()
            a, b = float(body["a"]), float(body["b"])
            theta_deg = float(body["theta_deg"])
            sigma1 = float(body.get("sigma1", sigma_init_for_spacing(session.grid.spacing_px)))
            sigma2 = float(body.get("sigma2", sigma_init_for_spacing(session.grid.spacing_px)))
            do_optimize = bool(body.get("optimize", False))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            return _error(400, "body needs a, b, theta_deg and optional sigmas")
        if not all(map(math.isfinite, (a, b, theta_deg, sigma1, sigma2))):
            return _error(400, "anchor values must be finite")
        if sigma1 <= 0 or sigma2 <= 0:
            return _error(400, "sigmas must be > 0")
        with session.lock:
            if session.model is None:
                return _error(409, "no fitted model to extend")
            if len(session.model.anchors) >= MAX_ANCHORS_ENCODABLE:
                return _error(409, "anchor capacity exhausted")
            # corrections compose against the base global model, so with
            # prior anchors overlapping (a, b) the requested angle must be
            # pre-compensated by their accumulated correction there
            from .qd import qd_orientation

            theta = _deg_to_rad(theta_deg)
            prior = wrap_half_pi(
                float(xqd_orientations_at([a], [b], session.model)[0])
                - qd_orientation(a, b, session.model.qd)
            )
            anchor = AnchorPoint(a=a, b=b, theta=wrap_half_pi(theta - prior),
                                 sigma1=sigma1, sigma2=sigma2)
            model = session.model.with_anchors(session.model.anchors + (anchor,))
            if do_optimize and session.marks:
                model = optimize(
                    model, session.marks,
                    ParamSelect(anchors=(len(model.anchors) - 1,)),
                    OptCaps(max_iterations=60),
                )
            session.model = model
            session.bump()
            session.model_revision = session.revision
            return {"model": session.model_summary(), "revision": session.revision}

    @app.get("/sessions/{session_id}/export")
    def export_model(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            if session.model is None:
                return _error(409, "no model to export")
            from dataclasses import replace

            grid = session.grid
            model = replace(
                session.model,
                image_width_px=int(round(grid.cols * grid.spacing_px)),
                image_height_px=int(round(grid.rows * grid.spacing_px)),
                grid_spacing_px=int(round(grid.spacing_px)),
            )
            data = encode(model)
        return Response(content=data, media_type="application/octet-stream")

    return app


def _write_snapshot(path: str, sessions: dict[str, Session]) -> None:
    docs = []
    for s in sessions.values():
        docs.append({
            "id": s.id,
            "grid": {"cols": s.grid.cols, "rows": s.grid.rows,
                     "spacing_px": s.grid.spacing_px,
                     "origin_px": list(s.grid.origin_px)},
            "cores": [list(p) for p in s.cores],
            "deltas": [list(p) for p in s.deltas],
            "marks": [{"x": m.x, "y": m.y, "theta_deg": _rad_to_deg(m.theta)}
                      for m in s.marks],
            "model_b64": base64.b64encode(encode(s.model)).decode("ascii")
            if s.model is not None else None,
            "revision": s.revision,
            "model_revision": s.model_revision,
        })
    Path(path).write_text(json.dumps(docs, indent=2) + "\n", encoding="utf-8")


def _load_snapshot(path: str, sessions: dict[str, Session]) -> None:
    docs = json.loads(Path(path).read_text(encoding="utf-8"))
    for doc in docs:
        session = Session(id=doc["id"], grid=_parse_grid_doc(doc["grid"]))
        session.cores = [tuple(p) for p in doc.get("cores", [])]
        session.deltas = [tuple(p) for p in doc.get("deltas", [])]
        session.marks = [Mark(x=m["x"], y=m["y"], theta=_deg_to_rad(m["theta_deg"]))
                         for m in doc.get("marks", [])]
        if doc.get("model_b64"):
            session.model = decode(base64.b64decode(doc["model_b64"]))
        session.revision = doc.get("revision", 0)
        session.model_revision = doc.get("model_revision", -1)
        sessions[session.id] = session
