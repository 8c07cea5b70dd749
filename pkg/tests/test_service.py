import numpy as np
import pytest
from fastapi.testclient import TestClient

from percodetect import _workflows, mctest
from percodetect.lattice import TriangularLattice, centered_square
from percodetect.mctest import run_test
from percodetect.noise import GrayField
from percodetect.service import app


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("PERCODETECT_CACHE_DIR", str(tmp_path / "cache"))


@pytest.fixture
def client():
    return TestClient(app)


def blob_values(side=12, square=6):
    values = np.zeros(side * side)
    values[centered_square(TriangularLattice(side), square).bits] = 1.0
    return values


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok" and body["version"]


def test_calibrate_endpoint_matches_library(client):
    resp = client.post("/calibrate", json={
        "n": 10, "p_e": [0.2, 0.3], "alpha": [0.05], "trials": 400, "seed": 5,
    })
    assert resp.status_code == 200
    body = resp.json()
    table = _workflows.calibration_table(10, [0.2, 0.3], [0.05], 400, 5)
    assert body["rows"] == table.rows
    assert body["csv"] == table.to_csv()


def test_calibrate_endpoint_validation(client):
    assert client.post("/calibrate", json={
        "n": 10, "p_e": [1.5], "alpha": [0.05],
    }).status_code == 422
    assert client.post("/calibrate", json={
        "n": 10, "p_e": [], "alpha": [0.05],
    }).status_code == 422
    assert client.post("/calibrate", json={
        "n": 0, "p_e": [0.2], "alpha": [0.05],
    }).status_code == 422


def test_detect_endpoint_matches_library(client):
    values = blob_values()
    resp = client.post("/detect", json={
        "side": 12, "values": values.tolist(), "tau": 0.5, "p_e": 0.1,
        "alpha": 0.05, "trials": 400, "seed": 5, "with_p_value": True,
    })
    assert resp.status_code == 200
    body = resp.json()

    lat = TriangularLattice(12)
    c0, _ = mctest.calibrate(12, 0.1, 0.05, 400, 5)
    micro = mctest.load_or_sweep(12, 400, 5)
    report = run_test(GrayField(12, values), 0.5, c0, lat, dist=micro.canonical(0.1))
    assert body["decision"] == report.decision == "reject-H0"
    assert body["T"] == report.statistic
    assert body["c0"] == report.critical_value == c0
    assert body["p_value"] == pytest.approx(report.p_value)


def test_detect_endpoint_rejects_wrong_payload_size(client):
    resp = client.post("/detect", json={"side": 12, "values": [0.0] * 10})
    assert resp.status_code == 422
    assert "expected 144 values" in resp.json()["detail"]


def test_power_endpoint(client):
    resp = client.post("/power", json={
        "n": 10, "p_b": [0.6, 0.7], "p_e": [0.2], "alpha": 0.05,
        "trials": 400, "seed": 5,
    })
    assert resp.status_code == 200
    body = resp.json()
    matrix, c0s = _workflows.power_matrix(10, [0.6, 0.7], [0.2], 0.05, 400, 5)
    assert body["c0"] == c0s
    assert body["beta"] == matrix
    assert body["csv"].splitlines()[0] == "p_B,0.2"
    # denser signal is easier to see
    assert body["beta"][1][0] <= body["beta"][0][0]


def test_dist_endpoint(client):
    resp = client.post("/dist", json={
        "n": 8, "p_e": [0.3, 0.5], "trials": 400, "seed": 5,
        "include_survival": True,
    })
    assert resp.status_code == 200
    body = resp.json()
    assert [q[0] for q in body["quantiles"]] == [0.3, 0.5]
    assert body["quantiles_csv"].startswith("p_E,q95,q99\n")
    assert set(body["survival_csv"]) == {"0.3", "0.5"}
    assert body["survival_csv"]["0.3"].startswith("t,survival\n")

    slim = client.post("/dist", json={"n": 8, "p_e": [0.3], "trials": 400, "seed": 5})
    assert slim.json()["survival_csv"] is None


def test_scan_endpoint(client):
    values = blob_values()
    resp = client.post("/scan", json={
        "side": 12, "values": values.tolist(), "schedule": [0.9, 0.6],
        "tau0": 0.0, "alpha": 0.05, "trials": 400, "seed": 5,
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["stopped"] == "reject"
    assert body["tests_performed"] == len(body["steps"]) >= 1
    step = body["steps"][-1]
    assert step["decision"] == "reject-H0" and step["statistic"] >= step["c0"]

    explicit = client.post("/scan", json={
        "side": 12, "values": values.tolist(), "schedule": [0.9, 0.6],
        "p_e": [0.05, 0.2], "trials": 400, "seed": 5,
    })
    assert explicit.status_code == 200
    assert explicit.json()["steps"][0]["p_e"] == 0.05

    bad = client.post("/scan", json={
        "side": 12, "values": [0.0] * 10, "schedule": [0.9],
    })
    assert bad.status_code == 422
