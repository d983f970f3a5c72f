"""HTTP service: catalogs, job lifecycle, progress streaming, exports."""

import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from apfit.models import ModelId, reference_params
from apfit.orchestrator import (config_from_dict, export_parameters, run_fit)
from apfit.service import create_app
from apfit.simulator import PacingConfig, simulate
from apfit.stimulus import SquareStimulus


@pytest.fixture()
def client():
    with TestClient(create_app(max_concurrent_jobs=2)) as c:
        yield c


def _selffit_payload(particles=48, iterations=3, seed=7, cl=400.0):
    pac = PacingConfig(cl, 1, 1)
    tr = simulate(ModelId.MS, reference_params(ModelId.MS), SquareStimulus(),
                  pac)
    return {
        "model": "ms",
        "normalize_to": 0.0,
        "num_stimuli": 1,
        "pre_stimuli": 1,
        "datasets": [{
            "kind": "voltage",
            "cycle_length": cl,
            "samples": [float(v) for v in tr.samples],
            "name": "synthetic",
        }],
        "pso": {"particles": particles, "iterations": iterations},
        "seed": seed,
    }


def _wait_done(client, job_id, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        doc = client.get(f"/fits/{job_id}").json()
        if doc["status"] in ("done", "failed", "cancelled"):
            return doc
        time.sleep(0.05)
    raise TimeoutError("job did not finish")


def test_models_listing(client):
    docs = client.get("/models").json()
    assert len(docs) == 6
    ids = {d["id"] for d in docs}
    assert ids == {m.value for m in ModelId}


def test_model_defaults_match_catalog(client):
    doc = client.get("/models/ms/defaults").json()
    assert doc["parameter_names"] == ["tau_in", "tau_out", "tau_close",
                                      "tau_open", "v_gate"]
    bounds = {b["name"]: (b["min"], b["max"]) for b in doc["default_bounds"]}
    assert bounds["tau_in"] == [0.15, 0.6] or bounds["tau_in"] == (0.15, 0.6)
    assert bounds["v_gate"][0] == 0.065 and bounds["v_gate"][1] == 0.26
    assert doc["default_normalize_to"] == 1.0
    assert doc["default_stimulus"]["magnitude"] == 0.2


def test_unknown_model_404(client):
    assert client.get("/models/xyz/defaults").status_code == 404


def test_unknown_job_404(client):
    assert client.get("/fits/deadbeef").status_code == 404
    assert client.post("/fits/deadbeef/cancel").status_code == 404


def test_submit_and_complete(client):
    resp = client.post("/fits", json=_selffit_payload())
    assert resp.status_code == 202
    job_id = resp.json()["job_id"]
    doc = _wait_done(client, job_id)
    assert doc["status"] == "done"
    assert len(doc["progress"]) == 4  # iterations + 1
    result = doc["result"]
    assert result["best_error"] == result["history"][-1]
    assert len(result["history"]) == 4
    assert set(result["best_params"]) == {"tau_in", "tau_out", "tau_close",
                                          "tau_open", "v_gate"}
    assert result["per_dataset_errors"][0]["label"] == "synthetic"


def test_progress_stream_equals_history_prefix(client):
    resp = client.post("/fits", json=_selffit_payload(seed=13))
    job_id = resp.json()["job_id"]
    events = []
    with client.stream("GET", f"/fits/{job_id}/progress") as stream:
        for line in stream.iter_lines():
            if line.startswith("data: "):
                events.append(json.loads(line[len("data: "):]))
    assert events[-1] == {"status": "done"}
    values = [e["lowest_error"] for e in events[:-1]]
    iterations = [e["iteration"] for e in events[:-1]]
    assert iterations == list(range(len(values)))
    doc = client.get(f"/fits/{job_id}").json()
    assert values == doc["result"]["history"]


def test_validation_error_names_parameter(client):
    payload = _selffit_payload()
    payload["parameters"] = {"tau_in": {"fit": True, "min": 0.6, "max": 0.1}}
    resp = client.post("/fits", json=payload)
    assert resp.status_code == 422
    errors = resp.json()["detail"]["errors"]
    assert any("tau_in" in e["field"] for e in errors)


def test_validation_error_for_apd_count(client):
    payload = _selffit_payload()
    payload["datasets"].append({
        "kind": "apd", "cycle_length": 400.0, "threshold": 0.5,
        "targets": [210.0, 195.0],
    })
    resp = client.post("/fits", json=payload)
    assert resp.status_code == 422
    errors = resp.json()["detail"]["errors"]
    assert any("targets" in e["field"] for e in errors)


def test_cancel_preserves_partial_history(client):
    payload = _selffit_payload(particles=512, iterations=400, seed=3)
    job_id = client.post("/fits", json=payload).json()["job_id"]
    deadline = time.time() + 60
    while time.time() < deadline:
        doc = client.get(f"/fits/{job_id}").json()
        if doc["status"] == "running" and len(doc["progress"]) >= 1:
            break
        time.sleep(0.02)
    client.post(f"/fits/{job_id}/cancel")
    doc = _wait_done(client, job_id)
    assert doc["status"] == "cancelled"
    assert 1 <= len(doc["progress"]) < 401
    assert doc["result"]["cancelled"] is True


def test_exports_match_direct_run(client):
    payload = _selffit_payload(seed=21)
    job_id = client.post("/fits", json=payload).json()["job_id"]
    _wait_done(client, job_id)
    served = client.get(f"/fits/{job_id}/export/parameters")
    assert served.status_code == 200

    config = config_from_dict(payload)
    direct = export_parameters(run_fit(config))
    assert served.text == direct  # same backend path, byte for byte

    for kind in ("details", "trace", "convergence"):
        resp = client.get(f"/fits/{job_id}/export/{kind}")
        assert resp.status_code == 200
    assert client.get(f"/fits/{job_id}/export/nope").status_code == 404


def test_export_before_done_is_409(client):
    payload = _selffit_payload(particles=512, iterations=300, seed=4)
    job_id = client.post("/fits", json=payload).json()["job_id"]
    resp = client.get(f"/fits/{job_id}/export/parameters")
    assert resp.status_code in (409, 200)  # 200 only if it already finished
    client.post(f"/fits/{job_id}/cancel")
    _wait_done(client, job_id)


def test_same_seed_jobs_identical_under_concurrent_load(client):
    payload = _selffit_payload(particles=128, iterations=4, seed=55)
    id1 = client.post("/fits", json=payload).json()["job_id"]
    id2 = client.post("/fits", json=payload).json()["job_id"]
    doc1 = _wait_done(client, id1)
    doc2 = _wait_done(client, id2)
    assert doc1["result"]["history"] == doc2["result"]["history"]
    assert doc1["result"]["best_params"] == doc2["result"]["best_params"]


def test_frontend_static_mount(tmp_path):
    (tmp_path / "index.html").write_text("<html><body>ui</body></html>")
    with TestClient(create_app(frontend_dir=tmp_path)) as c:
        resp = c.get("/")
        assert resp.status_code == 200
        assert "ui" in resp.text
        assert c.get("/models").status_code == 200  # API still wins


def test_job_record_echoes_config(client):
    payload = _selffit_payload(seed=31)
    job_id = client.post("/fits", json=payload).json()["job_id"]
    doc = _wait_done(client, job_id)
    echo = doc["config"]
    assert echo["model"] == "ms"
    assert echo["seed"] == 31
    assert echo["pso"]["particles"] == 48
    assert len(echo["datasets"][0]["samples"]) == 400
