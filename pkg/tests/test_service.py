import warnings

import numpy as np
import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore", DeprecationWarning)
    from fastapi.testclient import TestClient

from entsim import __version__, reports
from entsim.quantum import povm_to_json, random_rank1_povm, random_state, state_to_json
from entsim.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def instance():
    rng = np.random.default_rng(7)
    return state_to_json(random_state(1, rng)), povm_to_json(random_rank1_povm(1, 3, rng))


def test_health(client):
    reply = client.get("/health")
    assert reply.status_code == 200
    assert reply.json() == {"status": "ok", "version": __version__}


def test_all_routes_are_registered(client):
    paths = set(client.get("/openapi.json").json()["paths"])
    assert {
        "/health",
        "/simulate/bell",
        "/simulate/teleport",
        "/simulate/entangled",
        "/mi/bound",
        "/mi/audit",
        "/ne/quantum",
        "/ne/wrap",
        "/ne/cover",
    } <= paths


def test_bell_endpoint_matches_local_report(client):
    body = {"protocol": "rounds", "x": 0.3, "y": 0.05, "trials": 2000, "seed": 42}
    reply = client.post("/simulate/bell", json=body)
    assert reply.status_code == 200
    local = reports.bell_report("rounds", 0.3, 0.05, 2000, 42)
    assert reports.canonical_json(reply.json()) == reports.canonical_json(local)


def test_teleport_endpoint(client, instance):
    state, povm = instance
    reply = client.post("/simulate/teleport", json={"state": state, "povm": povm, "trials": 1000, "seed": 9})
    assert reply.status_code == 200
    report = reply.json()
    assert sum(cell["count"] for cell in report["outcomes"].values()) == 1000
    assert "agreement" not in report  # agreement applies to the two-angle command only
    assert report["communication"]["forward_max"] >= 20


def test_entangled_endpoint(client, instance):
    _, povm = instance
    reply = client.post(
        "/simulate/entangled",
        json={"alice_povm": povm, "bob_povm": povm, "trials": 1000, "seed": 13},
    )
    assert reply.status_code == 200
    assert reply.json()["chi2"]["p_value"] > 0.001


def test_domain_validation_maps_to_400_with_diagnostic(client, instance):
    state, povm = instance
    bad = {"n": povm["n"], "elements": [povm["elements"][0]]}
    reply = client.post("/simulate/teleport", json={"state": state, "povm": bad, "trials": 10, "seed": 1})
    assert reply.status_code == 400
    assert "identity" in reply.json()["detail"]


def test_schema_validation_maps_to_422(client):
    body = {"protocol": "rounds", "x": 0.3, "y": 0.05, "trials": 2000, "seed": 42}
    assert client.post("/simulate/bell", json={**body, "bogus": 1}).status_code == 422
    assert client.post("/simulate/bell", json={**body, "trials": 0}).status_code == 422
    assert client.post("/simulate/bell", json={**body, "x": 1.5}).status_code == 422
    assert client.post("/ne/cover", json={"n": 4}).status_code == 422


def test_mi_bound_endpoint(client):
    reply = client.post("/mi/bound", json={})
    assert reply.status_code == 200
    report = reply.json()
    assert f"{report['quadrature']:.6f}" == "0.278652"
    assert "monte_carlo" not in report
    reply = client.post("/mi/bound", json={"mc_samples": 50000, "seed": 5})
    assert reply.json()["monte_carlo"]["sigma_from_quadrature"] < 5.0


def test_mi_audit_endpoint(client):
    body = {"protocol": "rounds", "trials": 2000, "seed": 77, "x": 0.3, "y": 0.05}
    reply = client.post("/mi/audit", json=body)
    assert reply.status_code == 200
    report = reply.json()
    assert report["satisfied"] is True
    assert report["mi"]["value"] <= report["bound"]
    # missing angles is a domain error, not a schema error
    assert client.post("/mi/audit", json={"protocol": "rounds", "trials": 2000, "seed": 77}).status_code == 400


def test_ne_endpoints(client):
    reply = client.post("/ne/quantum", json={"n": 2, "x": 1, "y": 3})
    assert reply.status_code == 200
    assert reply.json()["probability"] == 1.0
    assert "checked_pairs" not in reply.json()

    reply = client.post("/ne/quantum", json={"n": 3, "exhaustive": True})
    assert reply.json()["all_consistent"] is True

    reply = client.post("/ne/wrap", json={"protocol": "rounds", "n": 2, "x": 1, "y": 1, "trials": 1000, "seed": 3})
    assert reply.json()["false_positives"] == 0

    reply = client.post("/ne/cover", json={"n": 2})
    report = reply.json()
    assert report["size"] == 4
    assert reports.canonical_json(report) == reports.canonical_json(reports.ne_cover_report(2))
