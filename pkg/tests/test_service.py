"""HTTP API tests with an in-process application."""

import json
import time

import pytest
from starlette.testclient import TestClient

from pinncal.service import create_app


@pytest.fixture()
def client():
    return TestClient(create_app())


def rod_config(tmp_path, **kw):
    cfg = {"case": "rod_analytical", "profile": "smoke", "max_iters": 150,
           "out_dir": str(tmp_path / "out")}
    cfg.update(kw)
    return cfg


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert "version" in body


def test_generate_endpoint(client, tmp_path):
    res = client.post("/generate", json={"config": rod_config(tmp_path)})
    assert res.status_code == 200
    files = res.json()["files"]
    assert len(files) == 3


def test_generate_rejects_bad_config(client, tmp_path):
    res = client.post("/generate", json={
        "config": {"case": "nope"}})
    assert res.status_code == 422
    res = client.post("/generate", json={
        "config": {"case": "rod_csv", "csv_path": "/does/not/exist.csv"}})
    assert res.status_code == 422


def test_calibrate_wait(client, tmp_path):
    res = client.post("/calibrate", params={"wait": True},
                      json={"config": rod_config(tmp_path)})
    assert res.status_code == 200
    body = res.json()
    assert body["status"] == "done"
    assert body["result"]["identified"]["E"] > 0
    assert body["result"]["schema_version"] == 1


def test_calibrate_job_polling(client, tmp_path):
    body = client.post("/calibrate",
                       json={"config": rod_config(tmp_path)}).json()
    job_id = body["job_id"]
    assert body["status"] in ("queued", "running", "done")
    deadline = time.time() + 120
    while time.time() < deadline:
        body = client.get(f"/jobs/{job_id}").json()
        if body["status"] in ("done", "failed"):
            break
        time.sleep(0.2)
    assert body["status"] == "done"
    assert "E" in body["result"]["identified"]


def test_unknown_job(client):
    assert client.get("/jobs/deadbeef").status_code == 404


def test_failed_job_reports_error(client, tmp_path):
    res = client.post("/calibrate", params={"wait": True}, json={
        "config": {"case": "rod_csv", "profile": "smoke",
                   "csv_path": str(tmp_path / "missing.csv")}})
    body = res.json()
    assert body["status"] == "failed"
    assert body["error"]


def test_sweep_requires_study(client, tmp_path):
    res = client.post("/sweep", json={"config": rod_config(tmp_path)})
    assert res.status_code == 422


def test_sweep_and_report_round_trip(client, tmp_path):
    cfg = rod_config(tmp_path, max_iters=120)
    cfg["study"] = {"name": "estimate_sensitivity",
                    "estimate_factors": [1.0], "n_repeats": 2}
    res = client.post("/sweep", params={"wait": True}, json={"config": cfg})
    body = res.json()
    assert body["status"] == "done"
    assert len(body["result"]["cells"]) == 1

    rep = client.post("/report", json={"results_dir": cfg["out_dir"]})
    assert rep.status_code == 200
    assert rep.json()["n_studies"] == 1

    missing = client.post("/report",
                          json={"results_dir": str(tmp_path / "nothing")})
    assert missing.status_code == 404


def test_request_schema_strict(client, tmp_path):
    res = client.post("/calibrate", json={"config": rod_config(tmp_path),
                                          "bogus": 1})
    assert res.status_code == 422
