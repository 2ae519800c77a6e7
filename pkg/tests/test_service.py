import math
import time

import pytest
from fastapi.testclient import TestClient

from xqdof.codec import decode
from xqdof.service import create_app
from xqdof.synth import parse_grid, synth_model, synth_truth
from xqdof.ofgrid import field_to_marks

GRID_DOC = {"cols": 12, "rows": 12, "spacing_px": 12}


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def _new_session(client, grid=GRID_DOC):
    r = client.post("/sessions", json={"grid": grid})
    assert r.status_code == 201
    return r.json()["id"]


def _wait_fit(client, sid, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        r = client.get(f"/sessions/{sid}/fit")
        assert r.status_code == 200
        doc = r.json()
        if doc["status"] in ("done", "failed"):
            return doc
        time.sleep(0.05)
    raise TimeoutError("fit did not finish")


def _loop_marks(seed=21):
    grid = parse_grid("12x12@12")
    truth = synth_model("loop", 2, seed, grid)
    field = synth_truth(truth, grid)
    marks = field_to_marks(field)
    core = truth.qd.core_world_positions()[0]
    delta = truth.qd.delta_world_positions()[0]
    return marks, core, delta


def test_create_session_and_errors(client):
    sid = _new_session(client)
    assert sid
    sid2 = _new_session(client)
    assert sid2 != sid
    assert client.post("/sessions", json={}).status_code == 400
    assert client.post("/sessions", json={"grid": {"cols": 0, "rows": 2, "spacing_px": 12}}).status_code == 400


def test_unknown_session_is_404(client):
    for method, url in [
        ("post", "/sessions/zzz/singular-points"),
        ("post", "/sessions/zzz/marks"),
        ("post", "/sessions/zzz/fit"),
        ("get", "/sessions/zzz/fit"),
        ("get", "/sessions/zzz/field"),
        ("post", "/sessions/zzz/anchors"),
        ("get", "/sessions/zzz/export"),
    ]:
        r = getattr(client, method)(url, json={}) if method == "post" else getattr(client, method)(url)
        assert r.status_code == 404, url


def test_singular_point_cardinality(client):
    sid = _new_session(client)
    for i in range(2):
        r = client.post(f"/sessions/{sid}/singular-points",
                        json={"kind": "core", "x": 10 + i, "y": 20})
        assert r.status_code == 200
        assert r.json()["cores"] == i + 1
    r = client.post(f"/sessions/{sid}/singular-points",
                    json={"kind": "core", "x": 30, "y": 40})
    assert r.status_code == 409
    for i in range(2):
        assert client.post(f"/sessions/{sid}/singular-points",
                           json={"kind": "delta", "x": 5, "y": 5 + i}).status_code == 200
    assert client.post(f"/sessions/{sid}/singular-points",
                       json={"kind": "delta", "x": 6, "y": 9}).status_code == 409
    assert client.post(f"/sessions/{sid}/singular-points",
                       json={"kind": "grue", "x": 1, "y": 2}).status_code == 400


def test_marks_wrapping_and_validation(client):
    sid = _new_session(client)
    r = client.post(f"/sessions/{sid}/marks", json=[{"x": 5, "y": 6, "theta_deg": 45}])
    assert r.status_code == 200 and r.json()["marks"] == 1
    r = client.post(f"/sessions/{sid}/marks", json=[{"x": 1, "y": 2, "theta_deg": 180}])
    assert r.status_code == 200
    # JSON cannot carry NaN literals; the service coerces strings and rejects
    assert client.post(f"/sessions/{sid}/marks",
                       json=[{"x": 1, "y": 2, "theta_deg": "NaN"}]).status_code == 400
    assert client.post(f"/sessions/{sid}/marks", json={"x": 1}).status_code == 400


def _fitted_session(client):
    sid = _new_session(client)
    assert client.post(f"/sessions/{sid}/fit", json={"strategy": "S1"}).status_code == 409

    marks, core, delta = _loop_marks()
    client.post(f"/sessions/{sid}/singular-points",
                json={"kind": "core", "x": core[0], "y": core[1]})
    client.post(f"/sessions/{sid}/singular-points",
                json={"kind": "delta", "x": delta[0], "y": delta[1]})
    payload = [{"x": m.x, "y": m.y, "theta_deg": math.degrees(m.theta) % 180.0}
               for m in marks]
    client.post(f"/sessions/{sid}/marks", json=payload)
    r = client.post(f"/sessions/{sid}/fit", json={"strategy": "S1"})
    assert r.status_code == 202
    doc = _wait_fit(client, sid)
    assert doc["status"] == "done"
    assert doc["report"]["anchors_used"] <= 3
    assert doc["model"]["stale"] is False
    return sid


def test_fit_requires_marks_and_runs(client):
    _fitted_session(client)


def test_field_endpoint_and_staleness(client):
    sid = _fitted_session(client)
    r = client.get(f"/sessions/{sid}/field", params={"stride": 1})
    assert r.status_code == 200
    doc = r.json()
    assert doc["stale"] is False
    assert len(doc["samples"]) == 144
    r = client.get(f"/sessions/{sid}/field", params={"stride": 4})
    assert len(r.json()["samples"]) == 9
    assert client.get(f"/sessions/{sid}/field", params={"stride": 0}).status_code == 400
    # a mutation marks the model stale
    client.post(f"/sessions/{sid}/marks", json=[{"x": 3, "y": 3, "theta_deg": 10}])
    assert client.get(f"/sessions/{sid}/field").json()["stale"] is True


def test_field_without_model_is_409(client):
    sid = _new_session(client)
    assert client.get(f"/sessions/{sid}/field").status_code == 409


def test_concurrent_fit_rejected(client):
    sid = _new_session(client)
    marks, _, _ = _loop_marks()
    payload = [{"x": m.x, "y": m.y, "theta_deg": math.degrees(m.theta) % 180.0}
               for m in marks]
    client.post(f"/sessions/{sid}/marks", json=payload)
    assert client.post(f"/sessions/{sid}/fit", json={"strategy": "S3"}).status_code == 202
    codes = set()
    for _ in range(5):
        codes.add(client.post(f"/sessions/{sid}/fit", json={"strategy": "S1"}).status_code)
        if 409 in codes:
            break
    assert 409 in codes
    _wait_fit(client, sid, timeout=120)


def test_anchor_insert_and_export(client):
    sid = _fitted_session(client)
    r = client.get(f"/sessions/{sid}/fit")
    n0 = r.json()["model"]["anchors"]
    # anchor without optimization pins the field at its location
    r = client.post(f"/sessions/{sid}/anchors",
                    json={"a": 66, "b": 66, "theta_deg": 77.0, "optimize": False})
    assert r.status_code == 200
    assert r.json()["model"]["anchors"] == n0 + 1
    assert r.json()["model"]["stale"] is False
    r = client.get(f"/sessions/{sid}/field")
    samples = r.json()["samples"]
    at = [s for s in samples if s["x"] == 66 and s["y"] == 66]
    assert len(at) == 1
    diff = abs(at[0]["theta_deg"] - 77.0) % 180.0
    assert min(diff, 180.0 - diff) < 0.5

    assert client.post(f"/sessions/{sid}/anchors",
                       json={"a": 1, "b": 2, "theta_deg": 10, "sigma1": -3}).status_code == 400

    r = client.get(f"/sessions/{sid}/export")
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("application/octet-stream")
    model = decode(r.content)
    assert len(model.anchors) == n0 + 1
    expected = 17 + 4 * (5 + 2 * (len(model.qd.cores) + len(model.qd.deltas))
                         + 5 * len(model.anchors))
    assert len(r.content) == expected


def test_anchor_without_model_is_409(client):
    sid = _new_session(client)
    assert client.post(f"/sessions/{sid}/anchors",
                       json={"a": 1, "b": 2, "theta_deg": 10}).status_code == 409


def test_export_without_model_is_409(client):
    sid = _new_session(client)
    assert client.get(f"/sessions/{sid}/export").status_code == 409


def test_snapshot_round_trip(tmp_path):
    snap = tmp_path / "sessions.json"
    with TestClient(create_app(snapshot_path=str(snap))) as client:
        sid = _new_session(client)
        client.post(f"/sessions/{sid}/singular-points",
                    json={"kind": "core", "x": 10, "y": 140})
        client.post(f"/sessions/{sid}/marks", json=[{"x": 5, "y": 6, "theta_deg": 30}])
    assert snap.exists()
    with TestClient(create_app(snapshot_path=str(snap))) as client:
        r = client.post(f"/sessions/{sid}/singular-points",
                        json={"kind": "core", "x": 12, "y": 150})
        assert r.status_code == 200
        assert r.json()["cores"] == 2


def test_healthz(client):
    assert client.get("/healthz").json()["status"] == "ok"
