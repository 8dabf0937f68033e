import pytest
from fastapi.testclient import TestClient

from main import app

client = TestClient(app)

SCHEMA = {
    "attributes": [
        {"name": "rid", "domain": ["r0", "r1", "r2", "r3"]},
        {"name": "disease", "domain": ["flu", "hiv", "none"]},
    ],
    "sensitive": ["disease"],
}


def rows(*values):
    return [{"rid": f"r{i}", "disease": v} for i, v in enumerate(values)]


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "online"}


def test_threshold_endpoint():
    response = client.get("/api/v1/guarantees/threshold",
                          params={"l_prime": 10, "varepsilon": 0.2, "t_e": 0.02, "f_s": 5})
    assert response.status_code == 200
    body = response.json()
    assert body["t_f_rounded"] == 11
    assert body["t_f"] == pytest.approx(11.18, abs=0.01)
    assert 0 <= body["t_p"] <= 1


def test_threshold_rejects_out_of_range():
    response = client.get("/api/v1/guarantees/threshold",
                          params={"l_prime": 10, "varepsilon": 0.2, "t_e": 0})
    assert response.status_code == 422
    assert response.json()["status"] == "error"


def test_tail_endpoint():
    response = client.get("/api/v1/guarantees/tail", params={"f_s": 5, "l_prime": 10, "varepsilon": 0.3})
    body = response.json()
    assert body["window"] == [4, 6]
    assert body["in_range_mass"] == pytest.approx(0.5178, abs=0.005)


def test_table_endpoint():
    response = client.get("/api/v1/guarantees/table", params={"l_prime": 5, "varepsilon": 0.2, "f_max": 10})
    body = response.json()
    assert [row["f_s"] for row in body] == list(range(1, 11))
    assert set(body[0]) == {"f_s", "chebyshev_bound", "exact_tail", "variance_bound"}


def test_anonymize_endpoint():
    response = client.post("/api/v1/anonymize", json={
        "schema": SCHEMA,
        "rows": rows("flu", "hiv", "flu", "hiv"),
        "config": {"l_prime": 2, "seed": 1},
    })
    assert response.status_code == 200
    body = response.json()
    assert body["columns"] == ["rid", "disease"]
    assert sorted(row[0] for row in body["rows"]) == ["r0", "r1", "r2", "r3"]
    assert all(row[1] in ("flu", "hiv") for row in body["rows"])
    assert body["l_prime"] == 2 and body["deleted"] == 0
    assert "groups" not in body


def test_ineligible_rows_conflict():
    response = client.post("/api/v1/anonymize", json={
        "schema": SCHEMA,
        "rows": rows("flu", "flu", "flu", "hiv"),
        "config": {"l_prime": 2, "seed": 1},
    })
    assert response.status_code == 409
    body = response.json()
    assert body["status"] == "error"
    assert body["message"] == "IneligibleDatasetError"
    assert "not eligible" in body["detail"]


def test_domain_violation_is_unprocessable():
    response = client.post("/api/v1/anonymize", json={
        "schema": SCHEMA,
        "rows": rows("flu", "cold", "flu", "hiv"),
        "config": {"l_prime": 2, "seed": 1},
    })
    assert response.status_code == 422
    assert response.json()["message"] == "DomainViolationError"


def test_estimate_endpoint():
    response = client.post("/api/v1/estimate", json={
        "schema": SCHEMA,
        "columns": ["rid", "disease"],
        "rows": [["r0", "flu"], ["r1", "hiv"], ["r2", "flu"], ["r3", "flu"]],
        "l_prime": 2,
        "query": {"sa": {"disease": "flu"}},
    })
    assert response.status_code == 200
    assert response.json() == {"estimate": 3.0, "iterations": 0, "converged": True}


def test_estimate_with_predicate():
    response = client.post("/api/v1/estimate", json={
        "schema": SCHEMA,
        "columns": ["rid", "disease"],
        "rows": [["r0", "flu"], ["r1", "hiv"], ["r2", "flu"], ["r3", "flu"]],
        "l_prime": 2,
        "query": {"nsa": {"rid": "r1"}, "sa": {"disease": "hiv"}},
    })
    assert response.status_code == 200
    body = response.json()
    assert 0.0 <= body["estimate"] <= 1.0
    assert body["iterations"] >= 1


def test_ragged_rows_rejected():
    response = client.post("/api/v1/estimate", json={
        "schema": SCHEMA,
        "columns": ["rid", "disease"],
        "rows": [["r0", "flu"], ["r1"]],
        "l_prime": 2,
        "query": {"sa": {"disease": "flu"}},
    })
    assert response.status_code == 422
