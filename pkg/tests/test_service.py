"""HTTP layer: thin translation onto the core calls, 400 on domain errors."""

import pytest
from fastapi.testclient import TestClient

from semdas.service import app

client = TestClient(app)


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"]


def test_generate_deterministic():
    req = {"num_identities": 3, "samples_per_identity": 2, "dimension": 8, "seed": 5}
    a = client.post("/embeddings/generate", json=req)
    b = client.post("/embeddings/generate", json=req)
    assert a.status_code == 200
    assert a.json() == b.json()
    body = a.json()
    assert body["dimension"] == 8
    assert len(body["records"]) == 6
    assert body["records"][0]["sample_id"] == "id000-s00"


def test_score_hand_value():
    resp = client.post("/match/score", json={"query": [1.0, 0.0], "key": [0.6, 0.8]})
    assert resp.status_code == 200
    assert resp.json()["score"] == pytest.approx(0.6, abs=1e-12)


def test_score_zero_vector_is_client_error():
    resp = client.post("/match/score", json={"query": [0.0, 0.0], "key": [1.0, 0.0]})
    assert resp.status_code == 400
    assert "zero" in resp.json()["detail"]


def test_domain_score_hand_value():
    resp = client.post("/match/domain", json={
        "p_mean": [1.0], "p_variance": [1.0],
        "q_mean": [0.0], "q_variance": [1.0],
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["kl"] == pytest.approx(0.5, abs=1e-15)
    assert body["score"] == pytest.approx(-0.5, abs=1e-15)


def test_expert_rank_endpoint():
    resp = client.post("/match/experts/rank", json={
        "test_samples": [[1.0, 0.1]],
        "experts": [
            {"expert_id": "e2", "subspace_basis": [[0.0, 1.0]], "training_mean": [0.0, 0.0]},
            {"expert_id": "e1", "subspace_basis": [[1.0, 0.0]], "training_mean": [0.0, 0.0]},
        ],
    })
    assert resp.status_code == 200
    ranking = resp.json()["ranking"]
    assert [e["id"] for e in ranking] == ["e1", "e2"]
    assert ranking[0]["value"] == pytest.approx(0.01, abs=1e-12)
    assert ranking[1]["value"] == pytest.approx(1.0, abs=1e-12)


def test_poll_rank_endpoint():
    resp = client.post("/match/poll/rank", json={
        "test_samples": [[0.1]],
        "models": [
            {"model_id": "far", "class_centroids": {"a": [5.0], "b": [6.0]}},
            {"model_id": "near", "class_centroids": {"a": [0.0], "b": [10.0]}},
        ],
    })
    assert resp.status_code == 200
    ranking = resp.json()["ranking"]
    assert [e["id"] for e in ranking] == ["near", "far"]
    assert ranking[0]["value"] == pytest.approx(1.0, abs=1e-12)
    assert ranking[1]["value"] == pytest.approx(0.9999796009127201, abs=1e-12)


def test_rate_endpoint_hand_value():
    resp = client.post("/channel/rate", json={
        "bandwidth_hz": 1.25e6, "avg_snr_db": 0.0, "power_gain": 3.0,
    })
    assert resp.status_code == 200
    assert resp.json()["rate_bps"] == 2.5e6


def test_select_endpoint_hand_example():
    scores = [0.9, 0.8, 0.2, 0.1]
    rates = [1.0, 5.0, 10.0, 2.0]
    resp = client.post("/select", json={
        "scheme": {"kind": "jscm"},
        "candidates": [
            {"source_id": f"s{i + 1}", "semantic_score": scores[i],
             "rate_mbps": rates[i], "power_gain": 1.0}
            for i in range(4)
        ],
        "k": 2,
    })
    assert resp.status_code == 200
    assert resp.json()["selected"] == ["s2", "s3"]


def test_select_endpoint_threshold_and_rs():
    candidates = [
        {"source_id": "s1", "semantic_score": 0.9, "rate_mbps": 1.0, "power_gain": 0.1},
        {"source_id": "s2", "semantic_score": 0.3, "rate_mbps": 1.0, "power_gain": 2.0},
    ]
    resp = client.post("/select", json={
        "scheme": {"kind": "threshold", "theta_score": 0.5, "theta_gain": 0.05},
        "candidates": candidates,
    })
    assert resp.json()["selected"] == ["s1"]
    a = client.post("/select", json={
        "scheme": {"kind": "rs"}, "candidates": candidates, "k": 1, "seed": 3,
    })
    b = client.post("/select", json={
        "scheme": {"kind": "rs"}, "candidates": candidates, "k": 1, "seed": 3,
    })
    assert a.json() == b.json()
    # rs without a seed cannot be served deterministically, so it is rejected
    resp = client.post("/select", json={
        "scheme": {"kind": "rs"}, "candidates": candidates, "k": 1,
    })
    assert resp.status_code == 400


def test_unknown_scheme_kind_is_client_error():
    resp = client.post("/select", json={
        "scheme": {"kind": "greedy"},
        "candidates": [{"source_id": "s1", "semantic_score": 0.1,
                        "rate_mbps": 1.0, "power_gain": 1.0}],
    })
    assert resp.status_code == 400


def _round_request():
    return {
        "query": {"sample_id": "q", "identity_label": "t", "vector": [1.0, 0.0, 0.0]},
        "sources": [
            {"sample_id": "a", "identity_label": "t", "vector": [0.9, 0.1, 0.0],
             "contains_target": True, "power_gain": 1.0},
            {"sample_id": "b", "identity_label": "x", "vector": [0.0, 1.0, 0.0],
             "power_gain": 2.0},
            {"sample_id": "c", "identity_label": "y", "vector": [0.0, 0.0, 1.0],
             "power_gain": 0.5},
        ],
        "scheme": {"kind": "bss"},
        "k": 1,
    }


def test_round_endpoint():
    resp = client.post("/round", json=_round_request())
    assert resp.status_code == 200
    body = resp.json()
    assert body["selected"] == ["src000"]
    assert body["missing"] is False
    assert body["downlink_bits"] == 3 * 32
    assert body["uplink_bits"] == 1_000_000
    assert body["latency_ms"] > 0
    assert set(body["per_source_rate_bps"]) == {"src000"}
    assert body["trace"][0].startswith("0,requester,query,q,3,32")
    assert client.post("/round", json=_round_request()).json() == body


def test_round_endpoint_verification():
    req = _round_request()
    req["verify_threshold"] = 0.99
    resp = client.post("/round", json=req)
    body = resp.json()
    # the best key scores ~0.994 against the query, so it survives
    assert body["selected"] == ["src000"]
    req["verify_threshold"] = 0.9999
    body = client.post("/round", json=req).json()
    assert body["selected"] == []
    assert body["missing"] is True
    assert body["uplink_bits"] == 0


def test_experiment_endpoint_deterministic():
    req = {
        "num_sensors": 8, "targets_per_trial": 2, "trials": 30, "dimension": 16,
        "num_identities": 8, "samples_per_identity": 4,
        "schemes": [{"kind": "bss"}], "k_sweep": [1, 2],
    }
    a = client.post("/experiment", json=req)
    b = client.post("/experiment", json=req)
    assert a.status_code == 200
    assert a.json() == b.json()
    rows = a.json()["rows"]
    assert len(rows) == 2
    assert [r["k"] for r in rows] == [1, 2]
    assert all(r["scheme"] == "bss" for r in rows)
    assert all(r["trials"] == 30 for r in rows)
    assert rows[0]["missing_rate"] >= rows[1]["missing_rate"]


def test_schema_violation_is_422():
    resp = client.post("/select", json={"scheme": {"kind": "bss"}})
    assert resp.status_code == 422
    resp = client.post("/match/score", json={"query": "not a vector", "key": [1.0]})
    assert resp.status_code == 422
    resp = client.post("/experiment", json={"trials": 1_000_000})
    assert resp.status_code == 422
